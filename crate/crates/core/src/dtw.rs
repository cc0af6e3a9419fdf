//! Multidimensional dynamic time warping and 1-nearest-neighbour
//! classification over feature matrices.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::ferasec::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl LocalMetric {
    fn cost(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            LocalMetric::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            LocalMetric::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }
}

/// Symmetric step pattern with unit weights; the metric is the only knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtwConfig {
    pub local_metric: LocalMetric,
}

/// Columns of a `dims × K` matrix as contiguous vectors.
fn columns(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.columns().into_iter().map(|c| c.to_vec()).collect()
}

/// Accumulated cost of the cheapest monotone warping path from the first to
/// the last column pair, moving by insertion, deletion or diagonal match.
pub fn mddtw_distance_view(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &DtwConfig) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "sequences have {} and {} dimensions",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Domain("DTW needs non-empty sequences".into()));
    }
    let xs = columns(x);
    let ys = columns(y);
    let width = ys.len();
    // two rolling rows of the cumulative cost table
    let mut prev = vec![f64::INFINITY; width];
    let mut cur = vec![f64::INFINITY; width];
    for (i, xc) in xs.iter().enumerate() {
        for (j, yc) in ys.iter().enumerate() {
            let local = cfg.local_metric.cost(xc, yc);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
            cur[j] = best + local;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[width - 1])
}

pub fn mddtw_distance(x: &FeatureMatrix, y: &FeatureMatrix, cfg: &DtwConfig) -> Result<f64> {
    mddtw_distance_view(x.view(), y.view(), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub label: String,
    pub index: usize,
    pub distance: f64,
}

/// Picks the nearest reference. Earlier references win exact ties.
pub fn classify_1nn<'a, I>(test: &FeatureMatrix, references: I, cfg: &DtwConfig) -> Result<Neighbour>
where
    I: IntoIterator<Item = (&'a FeatureMatrix, &'a str)>,
{
    let mut best: Option<Neighbour> = None;
    for (index, (reference, label)) in references.into_iter().enumerate() {
        let distance = mddtw_distance(test, reference, cfg)?;
        if best.as_ref().is_none_or(|b| distance < b.distance) {
            best = Some(Neighbour {
                label: label.to_string(),
                index,
                distance,
            });
        }
    }
    best.ok_or_else(|| Error::Domain("1-NN needs at least one reference".into()))
}
