//! Hybrid training: flat start, then alternate network training against the
//! current state labels with Viterbi realignment.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::align::{flat_start_align, splice_context};
use super::mlp::{Mlp, MlpSpec};
use super::model::{HmmModel, InputNorm, TrainConfig};
use super::topology::LeftToRight;
use crate::error::{Error, Result};

/// One labelled observation sequence (`dims × K`).
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub obs: ArrayView2<'a, f64>,
    pub label: &'a str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mean minibatch loss per epoch, one vector per realignment round.
    pub epoch_losses: Vec<Vec<f64>>,
}

pub fn train(corpus: &[Example<'_>], cfg: &TrainConfig) -> Result<HmmModel> {
    train_with_log(corpus, cfg).map(|(m, _)| m)
}

pub fn train_with_log(corpus: &[Example<'_>], cfg: &TrainConfig) -> Result<(HmmModel, TrainLog)> {
    cfg.validate()?;
    let first = corpus
        .first()
        .ok_or_else(|| Error::Training("empty training corpus".into()))?;
    let obs_dim = first.obs.nrows();
    let states = cfg.states;

    // classes in sorted label order
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in corpus {
        *counts.entry(ex.label).or_default() += 1;
    }
    if let Some((label, n)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::Training(format!("class {label:?} has {n} example(s), need at least 2")));
    }
    let labels: Vec<String> = counts.keys().map(|l| l.to_string()).collect();
    let classes = labels.len();
    let class_of: Vec<usize> = corpus
        .iter()
        .map(|ex| labels.iter().position(|l| l == ex.label).expect("label collected above"))
        .collect();

    for (i, ex) in corpus.iter().enumerate() {
        if ex.obs.nrows() != obs_dim {
            return Err(Error::Dimension(format!(
                "example {i} has {} dimensions, expected {obs_dim}",
                ex.obs.nrows()
            )));
        }
        if ex.obs.ncols() < states {
            return Err(Error::Training(format!(
                "example {i} has {} steps, fewer than {states} states",
                ex.obs.ncols()
            )));
        }
    }
    let norm = InputNorm::fit(corpus.iter().map(|ex| ex.obs), obs_dim)?;
    let lengths: Vec<usize> = corpus.iter().map(|ex| ex.obs.ncols()).collect();
    let input_dim = obs_dim * cfg.context;
    let total: usize = lengths.iter().sum();
    let mut all = Array2::<f32>::zeros((total, input_dim));
    let mut offsets = Vec::with_capacity(corpus.len());
    let mut at = 0;
    for ex in corpus {
        let x = splice_context(norm.apply(ex.obs).view(), cfg.context)?;
        all.slice_mut(ndarray::s![at..at + x.nrows(), ..])
            .assign(&x.mapv(|v| v as f32));
        offsets.push(at);
        at += x.nrows();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = MlpSpec {
        input_dim,
        hidden: cfg.hidden.clone(),
        output_dim: classes * states,
    };
    let mut mlp = Mlp::<f32>::glorot(&spec, &mut rng)?;

    let mut alignments: Vec<Vec<usize>> = lengths
        .iter()
        .map(|&len| flat_start_align(len, states))
        .collect::<Result<_>>()?;
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..total).collect();

    for round in 0..cfg.rounds {
        let targets = frame_targets(&alignments, &class_of, states, total);
        let mut lr = cfg.learning_rate as f32;
        let mut prev = f64::INFINITY;
        let mut losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut sum = 0.0f64;
            for batch in order.chunks(cfg.batch_size) {
                let x = all.select(Axis(0), batch);
                let t: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
                let (loss, grads) = mlp.loss_and_gradients(x.view(), &t).map_err(|e| {
                    Error::Numeric(format!("round {round}, epoch {epoch}: {e}"))
                })?;
                sum += f64::from(loss) * batch.len() as f64;
                mlp.apply_gradients(&grads, lr);
            }
            let epoch_loss = sum / total as f64;
            if !epoch_loss.is_finite() || !mlp.is_finite() {
                return Err(Error::Numeric(format!(
                    "round {round}, epoch {epoch}: training diverged (loss {epoch_loss})"
                )));
            }
            if epoch_loss >= prev {
                lr *= 0.5;
            }
            prev = epoch_loss;
            losses.push(epoch_loss);
        }
        log.epoch_losses.push(losses);

        let current = assemble(&labels, &alignments, &class_of, mlp.clone(), &norm, cfg)?;
        alignments = realign(&current, &all, &offsets, &lengths, &class_of)?;
    }
    let final_model = assemble(&labels, &alignments, &class_of, mlp, &norm, cfg)?;
    Ok((final_model, log))
}

fn frame_targets(alignments: &[Vec<usize>], class_of: &[usize], states: usize, total: usize) -> Vec<usize> {
    let mut t = Vec::with_capacity(total);
    for (path, &c) in alignments.iter().zip(class_of) {
        t.extend(path.iter().map(|&s| c * states + s));
    }
    t
}

/// Transitions and priors re-estimated from `alignments`, around `mlp`.
fn assemble(
    labels: &[String],
    alignments: &[Vec<usize>],
    class_of: &[usize],
    mlp: Mlp<f32>,
    norm: &InputNorm,
    cfg: &TrainConfig,
) -> Result<HmmModel> {
    let states = cfg.states;
    let classes = labels.len();
    let mut occupancy = vec![vec![0usize; states]; classes];
    let mut sequences = vec![0usize; classes];
    for (path, &c) in alignments.iter().zip(class_of) {
        sequences[c] += 1;
        for &s in path {
            occupancy[c][s] += 1;
        }
    }
    let topologies = occupancy
        .iter()
        .zip(&sequences)
        .map(|(occ, &n)| LeftToRight::from_occupancy(occ, n))
        .collect::<Result<Vec<_>>>()?;
    let frames: usize = occupancy.iter().flatten().sum();
    let mut priors: Vec<f64> = occupancy
        .iter()
        .flatten()
        .map(|&n| (n as f64 / frames as f64).max(cfg.prior_floor))
        .collect();
    let mass: f64 = priors.iter().sum();
    priors.iter_mut().for_each(|p| *p /= mass);
    HmmModel::new(labels.to_vec(), topologies, priors, mlp, norm.mean.len(), cfg.clone())?
        .with_input_norm(norm.clone())
}

fn realign(
    model: &HmmModel,
    all: &Array2<f32>,
    offsets: &[usize],
    lengths: &[usize],
    class_of: &[usize],
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(lengths.len());
    for ((&len, &start), &c) in lengths.iter().zip(offsets).zip(class_of) {
        let rows = all.slice(ndarray::s![start..start + len, ..]);
        let lp = model.network().log_posteriors(rows)?.mapv(f64::from);
        out.push(model.decode_with(&lp, c)?.path);
    }
    Ok(out)
}
