//! Leave-one-out evaluation, accuracy and confusion reporting.
//!
//! Items are put into a canonical order (label, repetition, position) before
//! anything else, so results do not depend on manifest order.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::clutter::{reduce_matrix, ClutterInit, DEFAULT_ALPHA};
use crate::dtw::{mddtw_distance_view, DtwConfig};
use crate::error::{Error, Result};
use crate::ferasec::{extract_features_with, FerasecConfig};
use crate::frames::load_frameset;
use crate::hmm::{train, Example, TrainConfig};
use crate::manifest::{CorpusManifest, RadarPosition};
use crate::synth::{item_seed, CorpusItem};

pub const THREADS_ENV: &str = "FERASEC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// FERASEC features, MD-DTW 1-NN.
    Dtw,
    /// FERASEC features, DNN-HMM.
    Hmm,
    /// Raw frames as DNN-HMM input.
    HmmRaw,
    /// Clutter-reduced frames as DNN-HMM input.
    HmmClutterReduced,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Dtw => "dtw",
            Method::Hmm => "hmm",
            Method::HmmRaw => "hmm-raw",
            Method::HmmClutterReduced => "hmm-clutterreduced",
        }
    }

    pub fn is_hmm(self) -> bool {
        self != Method::Dtw
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtw" => Ok(Method::Dtw),
            "hmm" => Ok(Method::Hmm),
            "hmm-raw" => Ok(Method::HmmRaw),
            "hmm-cr" | "hmm-clutterreduced" => Ok(Method::HmmClutterReduced),
            other => Err(Error::Domain(format!("unknown method {other:?}"))),
        }
    }
}

/// How HMM folds are formed. DTW is always exact leave-one-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmmProtocol {
    /// One full training run per held-out item.
    Faithful,
    /// `folds` class-balanced splits; each item is tested by the one model
    /// that did not see it.
    Fast { folds: usize },
}

impl HmmProtocol {
    pub const DEFAULT_FAST_FOLDS: usize = 5;

    fn tag(self) -> String {
        match self {
            HmmProtocol::Faithful => "loocv".into(),
            HmmProtocol::Fast { folds } => format!("fast-loocv-{folds}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub ferasec: FerasecConfig,
    pub alpha: f64,
    pub clutter_init: ClutterInit,
    pub dtw: DtwConfig,
    /// Template for every fold; the seed is replaced per fold.
    pub train: TrainConfig,
    pub protocol: HmmProtocol,
    /// Worker cap. `None` reads `FERASEC_THREADS`, then falls back to rayon's default.
    pub threads: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            ferasec: FerasecConfig::default(),
            alpha: DEFAULT_ALPHA,
            clutter_init: ClutterInit::FirstFrame,
            dtw: DtwConfig::default(),
            train: TrainConfig::default(),
            protocol: HmmProtocol::Faithful,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRecord {
    pub fold: usize,
    pub item_id: String,
    pub truth: String,
    pub prediction: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub features: Duration,
    pub evaluation: Duration,
    pub training_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: Method,
    pub protocol: String,
    pub labels: Vec<String>,
    /// `confusion[truth][prediction]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
    pub folds: Vec<FoldRecord>,
    pub accuracy_percent: f64,
    pub timing: Timing,
}

/// `x / (reps · B) · 100`.
pub fn accuracy(correct: usize, reps: usize, classes: usize) -> Result<f64> {
    let total = reps * classes;
    if total == 0 {
        return Err(Error::Domain("accuracy needs at least one item".into()));
    }
    if correct > total {
        return Err(Error::Domain(format!("{correct} correct out of {total} items")));
    }
    Ok(correct as f64 / total as f64 * 100.0)
}

impl EvaluationReport {
    pub fn from_folds(method: Method, protocol: String, labels: Vec<String>, folds: Vec<FoldRecord>, timing: Timing) -> Result<Self> {
        let index = |l: &str| {
            labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::Domain(format!("label {l:?} missing from report labels")))
        };
        let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
        for f in &folds {
            confusion[index(&f.truth)?][index(&f.prediction)?] += 1;
        }
        let correct = folds.iter().filter(|f| f.truth == f.prediction).count();
        let accuracy_percent = accuracy(correct, folds.len(), 1)?;
        Ok(EvaluationReport {
            method,
            protocol,
            labels,
            confusion,
            folds,
            accuracy_percent,
            timing,
        })
    }

    pub fn items(&self) -> usize {
        self.folds.len()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// Accuracy recomputed from the per-fold records alone.
    pub fn recomputed_accuracy(&self) -> f64 {
        let x = self.folds.iter().filter(|f| f.truth == f.prediction).count();
        x as f64 / self.folds.len() as f64 * 100.0
    }

    /// Row-relative percentages.
    pub fn confusion_percent(&self) -> Vec<Vec<f64>> {
        self.confusion
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 * 100.0 })
                    .collect()
            })
            .collect()
    }

    /// Human-readable table. Timing is left out so the text is reproducible.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method    {}", self.method);
        let _ = writeln!(out, "protocol  {}", self.protocol);
        let _ = writeln!(
            out,
            "accuracy  {:.2}% ({} / {})",
            self.accuracy_percent,
            self.correct(),
            self.items()
        );
        let _ = writeln!(out, "note      single synthetic participant; no per-participant averaging");
        let _ = writeln!(out);
        let w = self.labels.iter().map(|l| l.len()).max().unwrap_or(1).max(5);
        let _ = write!(out, "{:>w$} |", "truth");
        for l in &self.labels {
            let _ = write!(out, " {l:>w$}");
        }
        let _ = writeln!(out, " | {:>w$}", "n");
        let pct = self.confusion_percent();
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "{l:>w$} |");
            for c in &self.confusion[i] {
                let _ = write!(out, " {c:>w$}");
            }
            let _ = writeln!(out, " | {:>w$}", self.confusion[i].iter().sum::<usize>());
            let _ = write!(out, "{:>w$} |", "%");
            for p in &pct[i] {
                let _ = write!(out, " {:>w$}", format!("{p:.1}"));
            }
            let _ = writeln!(out, " |");
        }
        out
    }

    /// One `key=value` pair per line.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method={}", self.method);
        let _ = writeln!(out, "protocol={}", self.protocol);
        let _ = writeln!(out, "items={}", self.items());
        let _ = writeln!(out, "classes={}", self.labels.len());
        let _ = writeln!(out, "correct={}", self.correct());
        let _ = writeln!(out, "accuracy_percent={:.6}", self.accuracy_percent);
        let _ = writeln!(out, "labels={}", self.labels.join(","));
        for (i, t) in self.labels.iter().enumerate() {
            for (j, p) in self.labels.iter().enumerate() {
                let _ = writeln!(out, "confusion.{t}.{p}={}", self.confusion[i][j]);
            }
        }
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(
                out,
                "record.{i}=fold:{} item:{} truth:{} prediction:{}",
                f.fold, f.item_id, f.truth, f.prediction
            );
        }
        out
    }
}

/// Several reports as one table, one row per method.
pub fn render_comparison(reports: &[&EvaluationReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<20} {:<14} {:>9} {:>10}", "method", "protocol", "correct", "accuracy");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<20} {:<14} {:>9} {:>9.2}%",
            r.method.tag(),
            r.protocol,
            format!("{}/{}", r.correct(), r.items()),
            r.accuracy_percent
        );
    }
    out
}

/// Loads every frame set named in `manifest`, resolving paths against `base_dir`.
pub fn load_corpus(manifest: &CorpusManifest, base_dir: impl AsRef<Path>) -> Result<Vec<CorpusItem>> {
    let base = base_dir.as_ref();
    manifest
        .entries()
        .iter()
        .map(|e| {
            let frameset = load_frameset(base.join(&e.path)).map_err(|err| match err {
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", base.join(&e.path).display()),
                )),
                other => other,
            })?;
            Ok(CorpusItem {
                entry: e.clone(),
                frameset,
            })
        })
        .collect()
}

/// Runs `f` on a pool sized by the config or `FERASEC_THREADS`.
pub fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::Domain(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
            ),
            Err(_) => None,
        },
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Observation sequence (`dims × K`) fed to the classifier for `method`.
pub fn observations(item: &CorpusItem, method: Method, cfg: &EvalConfig) -> Result<Array2<f64>> {
    match method {
        Method::Dtw | Method::Hmm => {
            Ok(extract_features_with(&item.frameset, &cfg.ferasec, cfg.alpha, cfg.clutter_init)?.into_inner())
        }
        Method::HmmRaw => Ok(item.frameset.to_f64().reversed_axes()),
        Method::HmmClutterReduced => {
            let reduced = reduce_matrix(item.frameset.to_f64().view(), cfg.alpha, cfg.clutter_init)?;
            Ok(reduced.reversed_axes())
        }
    }
}

/// Leave-one-out evaluation of `items` with `method`.
pub fn loocv(items: &[CorpusItem], method: Method, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let items = canonical(items)?;
    with_pool(cfg.threads, || run(&items, method, cfg))?
}

/// Same as [`loocv`] restricted to one radar position.
pub fn loocv_at(items: &[CorpusItem], position: RadarPosition, method: Method, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let subset: Vec<CorpusItem> = items.iter().filter(|i| i.entry.position == position).cloned().collect();
    loocv(&subset, method, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawVariant {
    Raw,
    ClutterReduced,
}

/// DNN-HMM on frames instead of features, same protocol as [`loocv`].
pub fn baseline_rawframe_eval(items: &[CorpusItem], variant: RawVariant, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let method = match variant {
        RawVariant::Raw => Method::HmmRaw,
        RawVariant::ClutterReduced => Method::HmmClutterReduced,
    };
    loocv(items, method, cfg)
}

fn canonical(items: &[CorpusItem]) -> Result<Vec<CorpusItem>> {
    let manifest = CorpusManifest::new(items.iter().map(|i| i.entry.clone()).collect())?;
    let b = manifest.class_count();
    if b < 2 {
        return Err(Error::Domain(format!("evaluation needs at least 2 classes, got {b}")));
    }
    for class in manifest.classes() {
        let n = items.iter().filter(|i| i.entry.label == class).count();
        if n < 2 {
            return Err(Error::Domain(format!("class {class:?} has {n} item(s), need at least 2")));
        }
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| {
        (a.entry.label.as_str(), a.entry.repetition, a.entry.position).cmp(&(
            b.entry.label.as_str(),
            b.entry.repetition,
            b.entry.position,
        ))
    });
    Ok(sorted)
}

fn run(items: &[CorpusItem], method: Method, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let labels = CorpusManifest::new(items.iter().map(|i| i.entry.clone()).collect())?.classes();
    let start = Instant::now();
    let obs: Vec<Array2<f64>> = items
        .par_iter()
        .map(|item| {
            observations(item, method, cfg).map_err(|e| match e {
                Error::Dimension(m) | Error::Domain(m) => {
                    Error::Domain(format!("item {}: {m}", item.entry.id()))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let features = start.elapsed();
    let start = Instant::now();
    let (folds, training_runs, protocol) = match method {
        Method::Dtw => (dtw_folds(items, &obs, cfg)?, 0, "loocv".to_string()),
        _ => {
            let (f, runs) = hmm_folds(items, &obs, cfg)?;
            (f, runs, cfg.protocol.tag())
        }
    };
    let timing = Timing {
        features,
        evaluation: start.elapsed(),
        training_runs,
    };
    EvaluationReport::from_folds(method, protocol, labels, folds, timing)
}

fn audit(held_out: &[usize], used: &[usize], items: &[CorpusItem]) -> Result<()> {
    for &h in held_out {
        let id = items[h].entry.id();
        if used.iter().any(|&u| items[u].entry.id() == id) {
            return Err(Error::Domain(format!("fold leak: {id} is in its own reference set")));
        }
    }
    Ok(())
}

fn dtw_folds(items: &[CorpusItem], obs: &[Array2<f64>], cfg: &EvalConfig) -> Result<Vec<FoldRecord>> {
    let a = items.len();
    let pairs: Vec<(usize, usize)> = (0..a).flat_map(|i| (i + 1..a).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| mddtw_distance_view(obs[i].view(), obs[j].view(), &cfg.dtw))
        .collect::<Result<_>>()?;
    let mut d = Array2::<f64>::zeros((a, a));
    for (&(i, j), &v) in pairs.iter().zip(&dists) {
        d[[i, j]] = v;
        d[[j, i]] = v;
    }
    (0..a)
        .map(|i| {
            let refs: Vec<usize> = (0..a).filter(|&j| j != i).collect();
            audit(&[i], &refs, items)?;
            let mut best = refs[0];
            for &j in &refs[1..] {
                if d[[i, j]] < d[[i, best]] {
                    best = j;
                }
            }
            Ok(FoldRecord {
                fold: i,
                item_id: items[i].entry.id(),
                truth: items[i].entry.label.clone(),
                prediction: items[best].entry.label.clone(),
            })
        })
        .collect()
}

/// Held-out index sets, one per fold.
fn hmm_splits(items: &[CorpusItem], protocol: HmmProtocol) -> Result<Vec<Vec<usize>>> {
    match protocol {
        HmmProtocol::Faithful => Ok((0..items.len()).map(|i| vec![i]).collect()),
        HmmProtocol::Fast { folds } => {
            let min_class = {
                let mut counts = std::collections::BTreeMap::<&str, usize>::new();
                for it in items {
                    *counts.entry(it.entry.label.as_str()).or_default() += 1;
                }
                *counts.values().min().expect("non-empty corpus")
            };
            if folds < 2 || folds > min_class {
                return Err(Error::Domain(format!(
                    "fast protocol needs 2..={min_class} folds, got {folds}"
                )));
            }
            let mut splits = vec![Vec::new(); folds];
            let mut rank = std::collections::BTreeMap::<&str, usize>::new();
            for (i, it) in items.iter().enumerate() {
                let r = rank.entry(it.entry.label.as_str()).or_default();
                splits[*r % folds].push(i);
                *r += 1;
            }
            Ok(splits)
        }
    }
}

fn hmm_folds(items: &[CorpusItem], obs: &[Array2<f64>], cfg: &EvalConfig) -> Result<(Vec<FoldRecord>, usize)> {
    let splits = hmm_splits(items, cfg.protocol)?;
    let per_fold: Vec<Vec<(usize, String)>> = splits
        .par_iter()
        .enumerate()
        .map(|(fold, held)| {
            let train_idx: Vec<usize> = (0..items.len()).filter(|i| !held.contains(i)).collect();
            audit(held, &train_idx, items)?;
            let corpus: Vec<Example<'_>> = train_idx
                .iter()
                .map(|&i| Example {
                    obs: obs[i].view(),
                    label: items[i].entry.label.as_str(),
                })
                .collect();
            let tc = TrainConfig {
                seed: item_seed(cfg.seed, fold as u64),
                ..cfg.train.clone()
            };
            let model = train(&corpus, &tc).map_err(|e| fold_error(fold, &items[held[0]], e))?;
            held.iter()
                .map(|&i| {
                    let view: ArrayView2<'_, f64> = obs[i].view();
                    let c = model.classify(view).map_err(|e| fold_error(fold, &items[i], e))?;
                    Ok((i, c.label))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<FoldRecord> = Vec::with_capacity(items.len());
    for (fold, preds) in per_fold.into_iter().enumerate() {
        for (i, prediction) in preds {
            records.push(FoldRecord {
                fold,
                item_id: items[i].entry.id(),
                truth: items[i].entry.label.clone(),
                prediction,
            });
        }
    }
    records.sort_by_key(|r| items.iter().position(|it| it.entry.id() == r.item_id));
    Ok((records, splits.len()))
}

fn fold_error(fold: usize, item: &CorpusItem, e: Error) -> Error {
    let ctx = format!("fold {fold} (held out {})", item.entry.id());
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
        Error::Training(m) => Error::Training(format!("{ctx}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{ctx}: {m}")),
        other => other,
    }
}
