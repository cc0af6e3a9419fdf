//! Radar frame sets: the slow-time × fast-time amplitude matrix, its binary
//! file format, distance/time conversions and the correlation-based
//! positioning aid.
//!
//! Rows of a [`FrameSet`] are frames (slow time, one row per received sweep);
//! columns are fast-time bins (distance from the antenna).

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::codec::{dim_u32, Reader, Writer};
use crate::error::{Error, Result};

pub const FRAMESET_MAGIC: &[u8; 4] = b"FRS1";
pub const DEFAULT_BINS: usize = 256;
pub const DEFAULT_FRAME_RATE_HZ: f32 = 200.0;
pub const DEFAULT_RANGE_M: f32 = 1.0;
/// Correlation a live frame must exceed before recording starts.
pub const DEFAULT_AID_THRESHOLD: f64 = 0.95;

/// Upper bound of the normalized amplitude scale of unprocessed frames.
pub const RAW_AMPLITUDE_MAX: f32 = 100.0;

const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Raw,
    ClutterReduced,
}

impl FrameKind {
    fn code(self) -> u8 {
        match self {
            FrameKind::Raw => 0,
            FrameKind::ClutterReduced => 1,
        }
    }
}

/// One radar sweep: an amplitude per fast-time bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    amplitudes: Vec<f32>,
}

impl Frame {
    pub fn new(amplitudes: Vec<f32>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Domain("frame must have at least one bin".into()));
        }
        if let Some(bad) = amplitudes.iter().find(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("non-finite amplitude {bad}")));
        }
        Ok(Frame { amplitudes })
    }

    /// A frame straight from the radar; amplitudes must lie in `[0, 100]`.
    pub fn raw(amplitudes: Vec<f32>) -> Result<Self> {
        check_raw_range(&amplitudes)?;
        Frame::new(amplitudes)
    }

    pub fn bins(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f32] {
        &self.amplitudes
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|&a| f64::from(a)).collect()
    }
}

fn check_raw_range(values: &[f32]) -> Result<()> {
    match values
        .iter()
        .position(|a| !(0.0..=RAW_AMPLITUDE_MAX).contains(a))
    {
        Some(i) => Err(Error::Domain(format!(
            "raw amplitude {} at index {i} outside [0, 100]",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// `M` frames of `N` bins acquired at `frame_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    data: Array2<f32>,
    frame_rate_hz: f32,
    range_m: f32,
    kind: FrameKind,
    label: Option<String>,
}

impl FrameSet {
    /// Builds a frame set from an `M × N` matrix (row = frame).
    pub fn new(data: Array2<f32>, frame_rate_hz: f32, range_m: f32, kind: FrameKind) -> Result<Self> {
        let (m, n) = data.dim();
        if m == 0 || n == 0 {
            return Err(Error::Domain(format!("frame set must be non-empty, got {m}x{n}")));
        }
        if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
            return Err(Error::Domain(format!("frame rate must be positive, got {frame_rate_hz}")));
        }
        if !(range_m > 0.0 && range_m.is_finite()) {
            return Err(Error::Domain(format!("range must be positive, got {range_m}")));
        }
        if data.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("frame set contains non-finite amplitudes".into()));
        }
        if kind == FrameKind::Raw {
            if let Some(s) = data.as_slice() {
                check_raw_range(s)?;
            } else {
                check_raw_range(&data.iter().copied().collect::<Vec<_>>())?;
            }
        }
        Ok(FrameSet {
            data,
            frame_rate_hz,
            range_m,
            kind,
            label: None,
        })
    }

    pub fn from_frames(frames: &[Frame], frame_rate_hz: f32, range_m: f32, kind: FrameKind) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Domain("frame set needs at least one frame".into()))?;
        let n = first.bins();
        let mut flat = Vec::with_capacity(frames.len() * n);
        for (m, f) in frames.iter().enumerate() {
            if f.bins() != n {
                return Err(Error::Dimension(format!(
                    "frame {m} has {} bins, expected {n}",
                    f.bins()
                )));
            }
            flat.extend_from_slice(f.amplitudes());
        }
        let data = Array2::from_shape_vec((frames.len(), n), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        FrameSet::new(data, frame_rate_hz, range_m, kind)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Number of frames `M`.
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    /// Number of fast-time bins `N`.
    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame_rate_hz(&self) -> f32 {
        self.frame_rate_hz
    }

    pub fn range_m(&self) -> f32 {
        self.range_m
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn data(&self) -> &Array2<f32> {
        &self.data
    }

    /// Frame at zero-based slow-time index `m`.
    pub fn frame(&self, m: usize) -> ArrayView1<'_, f32> {
        self.data.row(m)
    }

    pub fn frame_owned(&self, m: usize) -> Frame {
        Frame {
            amplitudes: self.data.row(m).to_vec(),
        }
    }

    /// Amplitudes widened to `f64` for numerical stages.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(FRAMESET_MAGIC);
        w.u32(dim_u32(self.bins(), "bin count")?);
        w.u32(dim_u32(self.frames(), "frame count")?);
        w.f32(self.frame_rate_hz);
        w.f32(self.range_m);
        w.u8(self.kind.code());
        w.bytes(&[0, 0, 0]);
        w.buf.reserve(self.data.len() * 4);
        w.f32s(self.data.iter().copied());
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(FRAMESET_MAGIC)?;
        let n = r.u32("bin count")? as usize;
        let m = r.u32("frame count")? as usize;
        if n == 0 || m == 0 {
            return Err(Error::format(4, format!("empty dimensions {m}x{n}")));
        }
        let rate_offset = r.offset();
        let frame_rate_hz = r.f32("frame rate")?;
        if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
            return Err(Error::format(rate_offset, format!("frame rate {frame_rate_hz} not positive")));
        }
        let range_offset = r.offset();
        let range_m = r.f32("range")?;
        if !(range_m > 0.0 && range_m.is_finite()) {
            return Err(Error::format(range_offset, format!("range {range_m} not positive")));
        }
        let kind = match r.u8("kind")? {
            0 => FrameKind::Raw,
            1 => FrameKind::ClutterReduced,
            other => return Err(Error::format(20, format!("unknown kind byte {other}"))),
        };
        let reserved = r.take(3, "reserved bytes")?;
        if reserved.iter().any(|&b| b != 0) {
            return Err(Error::format(21, "reserved bytes must be zero"));
        }
        debug_assert_eq!(r.offset(), HEADER_LEN);
        let count = m
            .checked_mul(n)
            .ok_or_else(|| Error::format(4, "dimensions overflow"))?;
        if r.remaining() != count * 4 {
            let msg = format!(
                "payload holds {} bytes but {m}x{n} frame set needs {}",
                r.remaining(),
                count * 4
            );
            return Err(Error::format(HEADER_LEN, msg));
        }
        let values = r.f32_vec(count, "amplitudes")?;
        r.finish()?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(HEADER_LEN + 4 * i, "non-finite amplitude"));
        }
        if kind == FrameKind::Raw {
            if let Some(i) = values
                .iter()
                .position(|v| !(0.0..=RAW_AMPLITUDE_MAX).contains(v))
            {
                return Err(Error::format(
                    HEADER_LEN + 4 * i,
                    format!("raw amplitude {} outside [0, 100]", values[i]),
                ));
            }
        }
        let data = Array2::from_shape_vec((m, n), values).expect("length checked above");
        FrameSet::new(data, frame_rate_hz, range_m, kind)
    }
}

pub fn store_frameset(fs: &FrameSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, fs.to_bytes()?)?;
    Ok(())
}

pub fn load_frameset(path: impl AsRef<Path>) -> Result<FrameSet> {
    FrameSet::from_bytes(&fs::read(path)?)
}

/// Distance in meters of the 1-based fast-time bin `n` out of `bins`.
pub fn fast_time_to_distance(n: usize, bins: usize, range_m: f64) -> Result<f64> {
    if bins == 0 || n == 0 || n > bins {
        return Err(Error::Domain(format!("fast-time index {n} outside 1..={bins}")));
    }
    if !(range_m > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {range_m}")));
    }
    Ok(n as f64 / bins as f64 * range_m)
}

/// Seconds elapsed at the 1-based slow-time index `m`.
pub fn slow_time_to_seconds(m: usize, frame_rate_hz: f64) -> Result<f64> {
    if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
        return Err(Error::Domain(format!("frame rate must be positive, got {frame_rate_hz}")));
    }
    if m == 0 {
        return Err(Error::Domain("slow-time index starts at 1".into()));
    }
    Ok(m as f64 / frame_rate_hz)
}

/// Pearson correlation coefficient of two equal-length vectors.
///
/// A vector with zero variance makes the coefficient undefined and is
/// reported as [`Error::Degenerate`] instead of producing NaN.
pub fn pearson_correlation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "correlation inputs differ in length: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Degenerate("empty correlation input".into()));
    }
    let len = p.len() as f64;
    let p_mean = p.iter().sum::<f64>() / len;
    let q_mean = q.iter().sum::<f64>() / len;
    let (mut cross, mut p_var, mut q_var) = (0.0, 0.0, 0.0);
    for (&px, &qx) in p.iter().zip(q) {
        let dp = px - p_mean;
        let dq = qx - q_mean;
        cross += dp * dq;
        p_var += dp * dp;
        q_var += dq * dq;
    }
    if p_var == 0.0 || q_var == 0.0 {
        return Err(Error::Degenerate("correlation input has zero variance".into()));
    }
    Ok((cross / (p_var * q_var).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCheck {
    pub rho: f64,
    pub pass: bool,
}

/// Compares a live frame against the preset reference frame. The articulators
/// are considered in position when the correlation strictly exceeds
/// `threshold`.
pub fn positioning_check(reference: &Frame, live: &Frame, threshold: f64) -> Result<PositionCheck> {
    if reference.bins() != live.bins() {
        return Err(Error::Dimension(format!(
            "reference has {} bins, live frame has {}",
            reference.bins(),
            live.bins()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let rho = pearson_correlation(&reference.to_f64(), &live.to_f64())?;
    Ok(PositionCheck {
        rho,
        pass: rho > threshold,
    })
}
