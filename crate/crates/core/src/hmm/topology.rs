use ndarray::Array2;

use crate::error::{Error, Result};

pub const STATES_PER_CLASS: usize = 5;

/// Floor applied to allowed transitions after re-estimation so that no legal
/// move becomes impossible.
pub const TRANSITION_FLOOR: f64 = 1e-4;

/// Left-to-right transition structure: each state either stays or moves to
/// the next one. The last state only loops.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftToRight {
    transitions: Array2<f64>,
}

impl LeftToRight {
    /// Every state has an even chance of staying or advancing.
    pub fn uniform(states: usize) -> Result<Self> {
        if states == 0 {
            return Err(Error::Domain("topology needs at least one state".into()));
        }
        let mut t = Array2::zeros((states, states));
        for s in 0..states {
            if s + 1 < states {
                t[[s, s]] = 0.5;
                t[[s, s + 1]] = 0.5;
            } else {
                t[[s, s]] = 1.0;
            }
        }
        Ok(LeftToRight { transitions: t })
    }

    /// Checks structure and normalization.
    pub fn new(transitions: Array2<f64>) -> Result<Self> {
        let (rows, cols) = transitions.dim();
        if rows == 0 || rows != cols {
            return Err(Error::Dimension(format!("transition matrix must be square, got {rows}x{cols}")));
        }
        for s in 0..rows {
            for t in 0..cols {
                let v = transitions[[s, t]];
                let allowed = t == s || t == s + 1;
                if !allowed && v != 0.0 {
                    return Err(Error::Domain(format!("transition {s}->{t} is not left-to-right")));
                }
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Domain(format!("transition {s}->{t} = {v} is not a probability")));
                }
            }
            let sum: f64 = transitions.row(s).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("transition row {s} sums to {sum}")));
            }
        }
        Ok(LeftToRight { transitions })
    }

    /// Rebuilds rows from stored values, renormalizing each row over its
    /// allowed entries. Used when loading reduced-precision model files.
    pub(crate) fn renormalized(mut transitions: Array2<f64>) -> Result<Self> {
        for mut row in transitions.rows_mut() {
            let sum: f64 = row.sum();
            if !(sum > 0.0 && sum.is_finite()) {
                return Err(Error::Domain("transition row has no mass".into()));
            }
            row.mapv_inplace(|v| v / sum);
        }
        LeftToRight::new(transitions)
    }

    /// Re-estimates from state occupancy counts. `occupancy[s]` is the total
    /// number of frames spent in state `s` over `sequences` alignments, each
    /// of which visits every state exactly once in order.
    pub fn from_occupancy(occupancy: &[usize], sequences: usize) -> Result<Self> {
        let states = occupancy.len();
        if states == 0 || sequences == 0 {
            return Err(Error::Domain("occupancy re-estimation needs data".into()));
        }
        let mut t = Array2::zeros((states, states));
        for s in 0..states {
            if s + 1 == states {
                t[[s, s]] = 1.0;
                continue;
            }
            let total = occupancy[s] as f64;
            if occupancy[s] < sequences {
                return Err(Error::Domain(format!(
                    "state {s} occupied {} times by {sequences} sequences",
                    occupancy[s]
                )));
            }
            let advance = (sequences as f64 / total).max(TRANSITION_FLOOR);
            let stay = ((total - sequences as f64) / total).max(TRANSITION_FLOOR);
            let norm = advance + stay;
            t[[s, s]] = stay / norm;
            t[[s, s + 1]] = advance / norm;
        }
        LeftToRight::new(t)
    }

    pub fn states(&self) -> usize {
        self.transitions.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.transitions
    }

    /// Natural log of the transition matrix; forbidden moves are `-inf`.
    pub fn log_matrix(&self) -> Array2<f64> {
        self.transitions.mapv(f64::ln)
    }
}
