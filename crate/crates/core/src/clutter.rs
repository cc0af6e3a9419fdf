//! Single-pole loopback clutter filter.
//!
//! The clutter estimate tracks the slowly varying part of every fast-time bin:
//! `c_m = α·c_{m-1} + (1-α)·r_m`, and the reduced frame is `y_m = r_m - c_m`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::frames::{Frame, FrameKind, FrameSet};

pub const DEFAULT_ALPHA: f64 = 0.95;

/// How the clutter estimate is seeded before the first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClutterInit {
    /// `c_0 = r_1`; the first reduced frame is exactly zero.
    #[default]
    FirstFrame,
    /// `c_0 = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterState {
    estimate: Vec<f64>,
    alpha: f64,
}

impl ClutterState {
    pub fn new(estimate: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if estimate.is_empty() {
            return Err(Error::Domain("clutter state needs at least one bin".into()));
        }
        Ok(ClutterState { estimate, alpha })
    }

    pub fn zeros(bins: usize, alpha: f64) -> Result<Self> {
        ClutterState::new(vec![0.0; bins], alpha)
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Folds `frame` into the estimate in place and writes `frame - estimate`
    /// into `reduced`.
    pub fn update_in_place(&mut self, frame: &[f64], reduced: &mut [f64]) -> Result<()> {
        if frame.len() != self.estimate.len() || reduced.len() != frame.len() {
            return Err(Error::Dimension(format!(
                "frame has {} bins, clutter state has {}",
                frame.len(),
                self.estimate.len()
            )));
        }
        let a = self.alpha;
        for ((c, &r), y) in self.estimate.iter_mut().zip(frame).zip(reduced.iter_mut()) {
            // same recurrence, written so a converged estimate stays exactly put
            *c += (1.0 - a) * (r - *c);
            *y = r - *c;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// One filter step. Returns the advanced state and the clutter-reduced frame.
pub fn clutter_update(state: &ClutterState, frame: &Frame) -> Result<(ClutterState, Frame)> {
    let mut next = state.clone();
    let input = frame.to_f64();
    let mut reduced = vec![0.0; input.len()];
    next.update_in_place(&input, &mut reduced)?;
    let out = Frame::new(reduced.into_iter().map(|v| v as f32).collect())?;
    Ok((next, out))
}

/// Runs the filter down the slow-time axis of an `M × N` matrix.
pub fn reduce_matrix(raw: ArrayView2<'_, f64>, alpha: f64, init: ClutterInit) -> Result<Array2<f64>> {
    check_alpha(alpha)?;
    let (m, n) = raw.dim();
    if m == 0 || n == 0 {
        return Err(Error::Domain("cannot reduce an empty frame set".into()));
    }
    let seed = match init {
        ClutterInit::FirstFrame => raw.row(0).to_vec(),
        ClutterInit::Zero => vec![0.0; n],
    };
    let mut state = ClutterState::new(seed, alpha)?;
    let mut out = Array2::zeros((m, n));
    let mut frame = vec![0.0; n];
    let mut reduced = vec![0.0; n];
    for (src, mut dst) in raw.rows().into_iter().zip(out.rows_mut()) {
        for (f, &v) in frame.iter_mut().zip(src.iter()) {
            *f = v;
        }
        state.update_in_place(&frame, &mut reduced)?;
        for (d, &v) in dst.iter_mut().zip(&reduced) {
            *d = v;
        }
    }
    Ok(out)
}

/// Clutter-reduces a raw frame set with the default first-frame seeding.
pub fn reduce_frameset(raw: &FrameSet, alpha: f64) -> Result<FrameSet> {
    reduce_frameset_with(raw, alpha, ClutterInit::default())
}

pub fn reduce_frameset_with(raw: &FrameSet, alpha: f64, init: ClutterInit) -> Result<FrameSet> {
    if raw.kind() != FrameKind::Raw {
        return Err(Error::Domain("frame set is already clutter-reduced".into()));
    }
    let reduced = reduce_matrix(raw.to_f64().view(), alpha, init)?;
    let out = FrameSet::new(
        reduced.mapv(|v| v as f32),
        raw.frame_rate_hz(),
        raw.range_m(),
        FrameKind::ClutterReduced,
    )?;
    Ok(match raw.label() {
        Some(l) => out.with_label(l),
        None => out,
    })
}
