use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2};

use super::align::splice_context;
use super::mlp::{Dense, Mlp};
use super::topology::LeftToRight;
use super::viterbi::{viterbi, Decoded};
use crate::codec::{dim_u32, Reader, Writer};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"HMM1";
pub const MODEL_VERSION: u32 = 2;

/// Training recipe. Defaults follow a conventional small hybrid-ASR setup.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub context: usize,
    pub states: usize,
    pub prior_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 20,
            rounds: 3,
            learning_rate: 0.01,
            batch_size: 128,
            hidden: vec![256, 256, 256],
            context: super::align::CONTEXT_WINDOW,
            states: super::topology::STATES_PER_CLASS,
            prior_floor: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.rounds == 0 {
            return Err(Error::Domain("epochs and rounds must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!("bad learning rate {}", self.learning_rate)));
        }
        if self.context == 0 || self.context.is_multiple_of(2) {
            return Err(Error::Domain(format!("context window must be odd, got {}", self.context)));
        }
        if self.states == 0 {
            return Err(Error::Domain("need at least one state per class".into()));
        }
        if !(self.prior_floor > 0.0 && self.prior_floor < 1.0) {
            return Err(Error::Domain(format!("prior floor {} outside (0, 1)", self.prior_floor)));
        }
        Ok(())
    }
}

/// Per-dimension affine map `(x - mean) * scale` applied to observation
/// columns before splicing.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputNorm {
    pub fn identity(dims: usize) -> Self {
        InputNorm {
            mean: vec![0.0; dims],
            scale: vec![1.0; dims],
        }
    }

    /// Mean and inverse standard deviation of every row over all columns of
    /// `sequences`. Rows that barely vary are only centered. Values are
    /// rounded to `f32` so a stored model normalizes exactly as it trained.
    pub fn fit<'a, I>(sequences: I, dims: usize) -> Result<Self>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let mut sum = vec![0.0; dims];
        let mut sq = vec![0.0; dims];
        let mut n = 0usize;
        let seqs: Vec<ArrayView2<'a, f64>> = sequences.into_iter().collect();
        for obs in &seqs {
            if obs.nrows() != dims {
                return Err(Error::Dimension(format!("expected {dims} rows, got {}", obs.nrows())));
            }
            for (d, row) in obs.rows().into_iter().enumerate() {
                sum[d] += row.sum();
            }
            n += obs.ncols();
        }
        if n == 0 {
            return Err(Error::Domain("no observations to normalize".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| f64::from((s / n as f64) as f32)).collect();
        for obs in &seqs {
            for (d, row) in obs.rows().into_iter().enumerate() {
                sq[d] += row.iter().map(|v| (v - mean[d]) * (v - mean[d])).sum::<f64>();
            }
        }
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n as f64).sqrt();
                if sd > 1e-9 * (1.0 + m.abs()) {
                    f64::from((1.0 / sd) as f32)
                } else {
                    1.0
                }
            })
            .collect();
        let norm = InputNorm { mean, scale };
        norm.check(dims)?;
        Ok(norm)
    }

    fn check(&self, dims: usize) -> Result<()> {
        if self.mean.len() != dims || self.scale.len() != dims {
            return Err(Error::Dimension(format!("input normalization must cover {dims} dimensions")));
        }
        if self.mean.iter().any(|m| !m.is_finite()) || self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Numeric("input normalization is not finite and positive".into()));
        }
        Ok(())
    }

    pub fn apply(&self, obs: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = obs.to_owned();
        for (d, mut row) in out.rows_mut().into_iter().enumerate() {
            let (m, k) = (self.mean[d], self.scale[d]);
            row.mapv_inplace(|v| (v - m) * k);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    pub class_index: usize,
    /// Viterbi log-likelihood per class, in label order.
    pub log_likelihoods: Vec<f64>,
}

/// Per-class left-to-right HMMs sharing one state-posterior network.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub(crate) labels: Vec<String>,
    pub(crate) topologies: Vec<LeftToRight>,
    pub(crate) priors: Vec<f64>,
    pub(crate) mlp: Mlp<f32>,
    /// Dimension of one observation column before splicing.
    pub(crate) obs_dim: usize,
    pub(crate) norm: InputNorm,
    pub(crate) config: TrainConfig,
}

impl HmmModel {
    pub fn new(
        labels: Vec<String>,
        topologies: Vec<LeftToRight>,
        priors: Vec<f64>,
        mlp: Mlp<f32>,
        obs_dim: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        let classes = labels.len();
        if classes == 0 || topologies.len() != classes {
            return Err(Error::Dimension("one topology per class label required".into()));
        }
        let states = config.states;
        if topologies.iter().any(|t| t.states() != states) {
            return Err(Error::Dimension(format!("every class must have {states} states")));
        }
        if priors.len() != classes * states || mlp.output_dim() != classes * states {
            return Err(Error::Dimension("priors and network output must cover every class state".into()));
        }
        if mlp.input_dim() != obs_dim * config.context {
            return Err(Error::Dimension(format!(
                "network input {} does not match {obs_dim} x {} context",
                mlp.input_dim(),
                config.context
            )));
        }
        let total: f64 = priors.iter().sum();
        if priors.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("priors must be positive and sum to 1".into()));
        }
        if !mlp.is_finite() {
            return Err(Error::Numeric("network weights are not finite".into()));
        }
        Ok(HmmModel {
            labels,
            topologies,
            priors,
            mlp,
            obs_dim,
            norm: InputNorm::identity(obs_dim),
            config,
        })
    }

    pub fn with_input_norm(mut self, norm: InputNorm) -> Result<Self> {
        norm.check(self.obs_dim)?;
        self.norm = norm;
        Ok(self)
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.norm
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn topologies(&self) -> &[LeftToRight] {
        &self.topologies
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn network(&self) -> &Mlp<f32> {
        &self.mlp
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn states(&self) -> usize {
        self.config.states
    }

    /// Log state posteriors for every time step (`K × B·S`).
    pub fn log_posteriors(&self, obs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if obs.nrows() != self.obs_dim {
            return Err(Error::Dimension(format!(
                "model expects {}-dimensional observations, got {}",
                self.obs_dim,
                obs.nrows()
            )));
        }
        let spliced = splice_context(self.norm.apply(obs).view(), self.config.context)?;
        let lp = self.mlp.log_posteriors(spliced.mapv(|v| v as f32).view())?;
        Ok(lp.mapv(f64::from))
    }

    /// Scaled-likelihood emission scores of one class: log posterior minus
    /// log prior, `K × S`.
    pub(crate) fn class_emissions(&self, log_post: &Array2<f64>, class: usize) -> Array2<f64> {
        let s = self.config.states;
        let mut e = log_post.slice(s![.., class * s..(class + 1) * s]).to_owned();
        for (j, mut col) in e.columns_mut().into_iter().enumerate() {
            let lp = self.priors[class * s + j].ln();
            col.mapv_inplace(|v| v - lp);
        }
        e
    }

    pub(crate) fn decode_with(&self, log_post: &Array2<f64>, class: usize) -> Result<Decoded> {
        let e = self.class_emissions(log_post, class);
        let lt = self.topologies[class].log_matrix();
        viterbi(lt.view(), e.view())
    }

    /// Best state path of `obs` through the model of `class`.
    pub fn viterbi_decode(&self, class: usize, obs: ArrayView2<'_, f64>) -> Result<Decoded> {
        if class >= self.labels.len() {
            return Err(Error::Domain(format!("class index {class} out of range")));
        }
        self.check_len(obs.ncols())?;
        let lp = self.log_posteriors(obs)?;
        self.decode_with(&lp, class)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len < self.config.states {
            return Err(Error::Domain(format!(
                "sequence of {len} steps is shorter than {} states",
                self.config.states
            )));
        }
        Ok(())
    }

    /// Class whose HMM scores the sequence highest; the first class wins ties.
    pub fn classify(&self, obs: ArrayView2<'_, f64>) -> Result<Classification> {
        self.check_len(obs.ncols())?;
        let lp = self.log_posteriors(obs)?;
        let mut log_likelihoods = Vec::with_capacity(self.labels.len());
        for c in 0..self.labels.len() {
            log_likelihoods.push(self.decode_with(&lp, c)?.log_likelihood);
        }
        let class_index = argmax_first(&log_likelihoods);
        Ok(Classification {
            label: self.labels[class_index].clone(),
            class_index,
            log_likelihoods,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u32(dim_u32(self.labels.len(), "class count")?);
        w.u32(dim_u32(self.config.states, "state count")?);
        w.u32(dim_u32(self.config.context, "context window")?);
        w.u32(dim_u32(self.obs_dim, "observation dimension")?);
        for l in &self.labels {
            w.u32(dim_u32(l.len(), "label length")?);
            w.bytes(l.as_bytes());
        }
        w.f32s(self.norm.mean.iter().map(|&v| v as f32));
        w.f32s(self.norm.scale.iter().map(|&v| v as f32));
        for t in &self.topologies {
            w.f32s(t.matrix().iter().map(|&v| v as f32));
        }
        w.f32s(self.priors.iter().map(|&v| v as f32));
        let layers = self.mlp.layers();
        w.u32(dim_u32(layers.len(), "layer count")?);
        w.u32(dim_u32(self.mlp.input_dim(), "input width")?);
        for l in layers {
            w.u32(dim_u32(l.weights.ncols(), "layer width")?);
        }
        for l in layers {
            w.f32s(l.weights.iter().copied());
            w.f32s(l.bias.iter().copied());
        }
        let c = &self.config;
        w.u64(c.seed);
        w.u32(dim_u32(c.epochs, "epochs")?);
        w.u32(dim_u32(c.rounds, "rounds")?);
        w.u32(dim_u32(c.batch_size, "batch size")?);
        w.f32(c.learning_rate as f32);
        w.f32(c.prior_floor as f32);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let version = r.u32("version")?;
        if version != MODEL_VERSION {
            return Err(Error::format(4, format!("unsupported model version {version}")));
        }
        let classes = r.u32("class count")? as usize;
        let states = r.u32("state count")? as usize;
        let context = r.u32("context window")? as usize;
        let obs_dim = r.u32("observation dimension")? as usize;
        if classes == 0 || states == 0 || context == 0 || obs_dim == 0 {
            return Err(Error::format(8, "zero model dimension"));
        }
        let mut labels = Vec::with_capacity(classes);
        for _ in 0..classes {
            let len = r.u32("label length")? as usize;
            let at = r.offset();
            let raw = r.take(len, "label")?;
            let label = std::str::from_utf8(raw)
                .map_err(|_| Error::format(at, "label is not UTF-8"))?
                .to_string();
            labels.push(label);
        }
        let at = r.offset();
        let mean = r.f32_vec(obs_dim, "input mean")?.into_iter().map(f64::from).collect();
        let scale = r.f32_vec(obs_dim, "input scale")?.into_iter().map(f64::from).collect();
        let norm = InputNorm { mean, scale };
        norm.check(obs_dim).map_err(|e| Error::format(at, e.to_string()))?;
        let mut topologies = Vec::with_capacity(classes);
        for _ in 0..classes {
            let at = r.offset();
            let vals = r.f32_vec(states * states, "transition matrix")?;
            let m = Array2::from_shape_vec((states, states), vals.into_iter().map(f64::from).collect())
                .expect("length read above");
            topologies.push(
                LeftToRight::renormalized(m).map_err(|e| Error::format(at, e.to_string()))?,
            );
        }
        let at = r.offset();
        let raw_priors: Vec<f64> = r
            .f32_vec(classes * states, "priors")?
            .into_iter()
            .map(f64::from)
            .collect();
        let total: f64 = raw_priors.iter().sum();
        if !(total > 0.0) || raw_priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::format(at, "priors must be positive"));
        }
        let priors = raw_priors.iter().map(|p| p / total).collect();
        let layer_count = r.u32("layer count")? as usize;
        if layer_count == 0 {
            return Err(Error::format(r.offset() - 4, "network has no layers"));
        }
        let mut widths = vec![r.u32("input width")? as usize];
        for _ in 0..layer_count {
            widths.push(r.u32("layer width")? as usize);
        }
        let mut layers = Vec::with_capacity(layer_count);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weights = r.f32_vec(fan_in * fan_out, "layer weights")?;
            let bias = r.f32_vec(fan_out, "layer bias")?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((fan_in, fan_out), weights).expect("length read above"),
                bias: Array1::from_vec(bias),
            });
        }
        let at = r.offset();
        let mlp = Mlp::from_layers(layers).map_err(|e| Error::format(at, e.to_string()))?;
        let seed = r.u64("seed")?;
        let epochs = r.u32("epochs")? as usize;
        let rounds = r.u32("rounds")? as usize;
        let batch_size = r.u32("batch size")? as usize;
        let learning_rate = f64::from(r.f32("learning rate")?);
        let prior_floor = f64::from(r.f32("prior floor")?);
        r.finish()?;
        let config = TrainConfig {
            seed,
            epochs,
            rounds,
            learning_rate,
            batch_size,
            hidden: mlp.spec().hidden,
            context,
            states,
            prior_floor,
        };
        HmmModel::new(labels, topologies, priors, mlp, obs_dim, config)
            .and_then(|m| m.with_input_norm(norm))
            .map_err(|e| Error::format(bytes.len(), e.to_string()))
    }
}

pub fn store_model(model: &HmmModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_bytes()?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HmmModel> {
    HmmModel::from_bytes(&fs::read(path)?)
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
