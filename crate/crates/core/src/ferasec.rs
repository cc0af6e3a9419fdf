//! Envelope features of concatenated frames.
//!
//! A frame set is flattened row by row into one long sequence, the moving RMS
//! envelope of that sequence is taken, sampled every `D` points and stripped of
//! its mean. Doing this for both the raw and the clutter-reduced frame set
//! yields two feature rows; their first and second regression deltas make up
//! the remaining four rows of a [`FeatureMatrix`].
//!
//! [`normalize_length`] and [`circular_align`] are comparison aids for
//! plotting several utterances on a common axis. The classifiers consume
//! features at native length.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::clutter::{self, ClutterInit};
use crate::codec::{dim_u32, Reader, Writer};
use crate::error::{Error, Result};
use crate::frames::{pearson_correlation, FrameKind, FrameSet};

pub const FEATURE_ROWS: usize = 6;
pub const FEATURE_MAGIC: &[u8; 4] = b"FTM1";
pub const NORMALIZED_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FerasecConfig {
    /// RMS window length `W` (even).
    pub window: usize,
    /// Downsampling stride `D`.
    pub downsample: usize,
    /// Delta regression window `L` (odd).
    pub delta_window: usize,
}

impl Default for FerasecConfig {
    fn default() -> Self {
        FerasecConfig {
            window: 400,
            downsample: 1024,
            delta_window: 9,
        }
    }
}

impl FerasecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "RMS window must be even and at least 2, got {}",
                self.window
            )));
        }
        if self.downsample == 0 {
            return Err(Error::Domain("downsampling factor must be at least 1".into()));
        }
        if self.delta_window < 3 || self.delta_window.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "delta window must be odd and at least 3, got {}",
                self.delta_window
            )));
        }
        Ok(())
    }

    /// Feature length for a frame set of `frames × bins`.
    pub fn feature_len(&self, frames: usize, bins: usize) -> usize {
        frames * bins / self.downsample
    }
}

/// Six feature rows over `K` downsampled time steps.
///
/// Row order: raw envelope, clutter-reduced envelope, delta of each, then
/// delta-delta of each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() != FEATURE_ROWS {
            return Err(Error::Dimension(format!(
                "feature matrix needs {FEATURE_ROWS} rows, got {}",
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::Domain("feature matrix needs at least one column".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("feature matrix contains non-finite values".into()));
        }
        Ok(FeatureMatrix { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("feature rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), k), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        FeatureMatrix::new(data)
    }

    /// Sequence length `K`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.data.row(r)
    }

    /// Six-dimensional observation at time step `k`.
    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.data.column(k)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(FEATURE_MAGIC);
        w.u32(dim_u32(self.data.nrows(), "row count")?);
        w.u32(dim_u32(self.data.ncols(), "feature length")?);
        w.f32s(self.data.iter().map(|&v| v as f32));
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(FEATURE_MAGIC)?;
        let rows = r.u32("row count")? as usize;
        if rows != FEATURE_ROWS {
            return Err(Error::format(4, format!("expected {FEATURE_ROWS} rows, found {rows}")));
        }
        let k = r.u32("feature length")? as usize;
        if k == 0 {
            return Err(Error::format(8, "feature length is zero"));
        }
        if r.remaining() != rows * k * 4 {
            let msg = format!("payload holds {} bytes, {rows}x{k} needs {}", r.remaining(), rows * k * 4);
            return Err(Error::format(12, msg));
        }
        let values = r.f32_vec(rows * k, "feature values")?;
        r.finish()?;
        let data = Array2::from_shape_vec((rows, k), values.into_iter().map(f64::from).collect())
            .expect("length checked above");
        FeatureMatrix::new(data)
    }
}

pub fn store_features(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, features.to_bytes()?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    FeatureMatrix::from_bytes(&fs::read(path)?)
}

/// Concatenates the frames of a frame set end to end.
pub fn vectorize(fs: &FrameSet) -> Vec<f64> {
    fs.data().iter().map(|&v| f64::from(v)).collect()
}

pub fn vectorize_matrix(matrix: ArrayView2<'_, f64>) -> Vec<f64> {
    matrix.iter().copied().collect()
}

/// Moving RMS with window `W` at one zero-based position `j`.
///
/// The window runs from `j - W/2` to `j + W/2 - 1`, clipped to the sequence,
/// and the sum of squares is always divided by `W`, so clipped edge windows
/// come out damped.
fn rms_at(f: &[f64], j: usize, window: usize) -> f64 {
    let half = window / 2;
    let lo = j.saturating_sub(half);
    let hi = (j + half).min(f.len());
    let sum_sq: f64 = f[lo..hi].iter().map(|v| v * v).sum();
    (sum_sq / window as f64).sqrt()
}

pub fn rms_envelope(f: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 || !window.is_multiple_of(2) {
        return Err(Error::Domain(format!("RMS window must be even and at least 2, got {window}")));
    }
    Ok((0..f.len()).map(|j| rms_at(f, j, window)).collect())
}

/// Keeps every `D`-th envelope value: `v_k = e_{D·k}` for `k = 1..=⌊len/D⌋`.
pub fn downsample(e: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::Domain("downsampling factor must be at least 1".into()));
    }
    if e.len() < factor {
        return Err(Error::Domain(format!(
            "frame set too short: {} samples for downsampling factor {factor}",
            e.len()
        )));
    }
    Ok(e.iter().skip(factor - 1).step_by(factor).copied().collect())
}

pub fn remove_dc(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("cannot remove the mean of an empty sequence".into()));
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok(v.iter().map(|x| x - mean).collect())
}

/// Regression delta over a window of `L` points; samples outside the
/// sequence count as zero.
pub fn delta(z: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Domain(format!("delta window must be odd and at least 3, got {window}")));
    }
    let half = (window / 2) as isize;
    let denom: f64 = (1..=half).map(|l| 2.0 * (l * l) as f64).sum();
    let len = z.len() as isize;
    Ok((0..len)
        .map(|k| {
            let mut acc = 0.0;
            for l in 1..=half {
                let ahead = if k + l < len { z[(k + l) as usize] } else { 0.0 };
                let behind = if k - l >= 0 { z[(k - l) as usize] } else { 0.0 };
                acc += l as f64 * (ahead - behind);
            }
            acc / denom
        })
        .collect())
}

/// One feature row: envelope, sampled, DC-free. Only the sampled envelope
/// points are evaluated.
fn envelope_row(f: &[f64], cfg: &FerasecConfig) -> Result<Vec<f64>> {
    let k = f.len() / cfg.downsample;
    if k == 0 {
        return Err(Error::Domain(format!(
            "frame set too short: {} samples for downsampling factor {}",
            f.len(),
            cfg.downsample
        )));
    }
    let sampled: Vec<f64> = (1..=k)
        .map(|i| rms_at(f, i * cfg.downsample - 1, cfg.window))
        .collect();
    remove_dc(&sampled)
}

pub fn extract_features(raw: &FrameSet, cfg: &FerasecConfig, alpha: f64) -> Result<FeatureMatrix> {
    extract_features_with(raw, cfg, alpha, ClutterInit::default())
}

pub fn extract_features_with(
    raw: &FrameSet,
    cfg: &FerasecConfig,
    alpha: f64,
    init: ClutterInit,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    if raw.kind() != FrameKind::Raw {
        return Err(Error::Domain("feature extraction expects a raw frame set".into()));
    }
    let matrix = raw.to_f64();
    let reduced = clutter::reduce_matrix(matrix.view(), alpha, init)?;
    let first = envelope_row(&vectorize_matrix(matrix.view()), cfg)?;
    let second = envelope_row(&vectorize_matrix(reduced.view()), cfg)?;
    let d1 = delta(&first, cfg.delta_window)?;
    let d2 = delta(&second, cfg.delta_window)?;
    let dd1 = delta(&d1, cfg.delta_window)?;
    let dd2 = delta(&d2, cfg.delta_window)?;
    FeatureMatrix::from_rows(&[first, second, d1, d2, dd1, dd2])
}

/// Resamples a sequence to `target` points: linear interpolation when it is
/// shorter, rounded uniform index selection when it is longer.
pub fn normalize_length(seq: &[f64], target: usize) -> Result<Vec<f64>> {
    let k = seq.len();
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 samples to resample, got {k}")));
    }
    if target < 2 {
        return Err(Error::Domain(format!("target length must be at least 2, got {target}")));
    }
    if k == target {
        return Ok(seq.to_vec());
    }
    let step = (k - 1) as f64 / (target - 1) as f64;
    let out = (0..target).map(|t| {
        let pos = t as f64 * step;
        if k > target {
            seq[(pos.round() as usize).min(k - 1)]
        } else {
            let lo = (pos.floor() as usize).min(k - 2);
            let frac = pos - lo as f64;
            seq[lo] + frac * (seq[lo + 1] - seq[lo])
        }
    });
    let mut out: Vec<f64> = out.collect();
    // pin the last sample against rounding in `pos`
    out[target - 1] = seq[k - 1];
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub aligned: Vec<f64>,
    /// Left rotation applied: `aligned[i] = seq[(i + shift) % T]`.
    pub shift: usize,
    pub correlation: f64,
}

/// Finds the circular rotation of `seq` that correlates best with `reference`.
/// Every rotation is tried; the smallest shift wins ties.
pub fn circular_align(seq: &[f64], reference: &[f64]) -> Result<Alignment> {
    if seq.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "sequence has {} samples, reference has {}",
            seq.len(),
            reference.len()
        )));
    }
    let t = seq.len();
    let mut best: Option<(usize, f64)> = None;
    let mut rotated = vec![0.0; t];
    for shift in 0..t {
        for (i, r) in rotated.iter_mut().enumerate() {
            *r = seq[(i + shift) % t];
        }
        let rho = pearson_correlation(&rotated, reference)?;
        if best.is_none_or(|(_, b)| rho > b) {
            best = Some((shift, rho));
        }
    }
    let (shift, correlation) =
        best.ok_or_else(|| Error::Degenerate("cannot align empty sequences".into()))?;
    let aligned = (0..t).map(|i| seq[(i + shift) % t]).collect();
    Ok(Alignment {
        aligned,
        shift,
        correlation,
    })
}
