//! Fully connected network with rectifier hidden layers and a softmax output,
//! trained on cross-entropy by plain minibatch gradient descent.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, NumAssign};
use rand::Rng;

use crate::error::{Error, Result};

pub trait Real: Float + NumAssign + LinalgScalar + ScalarOperand + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    fn validate(&self) -> Result<()> {
        if self.widths().contains(&0) {
            return Err(Error::Dimension(format!("zero-width layer in {:?}", self.widths())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `fan_in × fan_out`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

pub type Gradients<T> = Vec<Dense<T>>;

impl<T: Real> Mlp<T> {
    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .map(|w| Dense {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        let mut mlp = Mlp::zeros(spec)?;
        for layer in &mut mlp.layers {
            let (fan_in, fan_out) = layer.weights.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| T::of(rng.random_range(-limit..limit)));
        }
        Ok(mlp)
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != l.bias.len() {
                return Err(Error::Dimension(format!("layer {i}: bias does not match weights")));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::Dimension(format!("layer {i}: fan-in does not match previous layer")));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input_dim: self.input_dim(),
            hidden: self.layers[..self.layers.len() - 1]
                .iter()
                .map(|l| l.weights.ncols())
                .collect(),
            output_dim: self.output_dim(),
        }
    }

    fn check_input(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        Ok(())
    }

    /// Pre-softmax outputs and every layer's activation (input first).
    fn forward_trace(&self, x: ArrayView2<'_, T>) -> (Vec<Array2<T>>, Array2<T>) {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = cur.dot(&layer.weights);
            z += &layer.bias;
            acts.push(cur);
            if i < last {
                z.mapv_inplace(|v| v.max(T::zero()));
            }
            cur = z;
        }
        (acts, cur)
    }

    /// Row-wise log-softmax of the network output for a batch (one row per
    /// input vector).
    pub fn log_posteriors(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        let (_, mut logits) = self.forward_trace(x);
        for mut row in logits.rows_mut() {
            log_softmax_in_place(row.as_slice_mut().expect("owned rows are contiguous"));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network produced non-finite outputs".into()));
        }
        Ok(logits)
    }

    /// Posterior probabilities for one input vector.
    pub fn forward(&self, input: ArrayView1<'_, T>) -> Result<Vec<T>> {
        let x = input.insert_axis(Axis(0));
        let lp = self.log_posteriors(x)?;
        Ok(lp.row(0).iter().map(|v| v.exp()).collect())
    }

    /// Mean cross-entropy of `targets` over the batch and its gradient.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, T>, targets: &[usize]) -> Result<(T, Gradients<T>)> {
        self.check_input(x)?;
        if targets.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "{} targets for {} inputs",
                targets.len(),
                x.nrows()
            )));
        }
        let out_dim = self.output_dim();
        if let Some(t) = targets.iter().find(|&&t| t >= out_dim) {
            return Err(Error::Dimension(format!("target {t} outside {out_dim} outputs")));
        }
        let batch = T::of(x.nrows() as f64);
        let (acts, mut delta) = self.forward_trace(x);
        let mut loss = T::zero();
        for (mut row, &t) in delta.rows_mut().into_iter().zip(targets) {
            let row = row.as_slice_mut().expect("owned rows are contiguous");
            log_softmax_in_place(row);
            loss -= row[t];
            // d(loss)/d(logit) = softmax - onehot
            for v in row.iter_mut() {
                *v = v.exp();
            }
            row[t] -= T::one();
        }
        loss /= batch;
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite training loss".into()));
        }
        delta.mapv_inplace(|v| v / batch);

        let mut grads: Gradients<T> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let a = &acts[i];
            let gw = a.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&layer.weights.t());
                // rectifier derivative: activations of layer i are post-ReLU
                Zip::from(&mut back).and(a).for_each(|d, &act| {
                    if act <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights: gw, bias: gb });
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn apply_gradients(&mut self, grads: &Gradients<T>, learning_rate: T) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.bias.scaled_add(-learning_rate, &g.bias);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every weight then bias of every layer, in order.
    pub fn params(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for a network with {}",
                values.len(),
                self.param_count()
            )));
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in layer.bias.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Flattens gradients in the same order as [`Mlp::params`].
pub fn flatten<T: Real>(layers: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

fn log_softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = row.iter().map(|&v| (v - max).exp()).fold(T::zero(), |a, b| a + b);
    let log_norm = max + sum.ln();
    for v in row.iter_mut() {
        *v -= log_norm;
    }
}
