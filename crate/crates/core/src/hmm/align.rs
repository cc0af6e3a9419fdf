//! Network input construction and initial state segmentation.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const CONTEXT_WINDOW: usize = 7;

/// Stacks each time step with its neighbours: row `k` of the result
/// concatenates columns `k - w/2 ..= k + w/2` of `obs` (`dims × K`), with
/// out-of-range columns replaced by the nearest edge column.
pub fn splice_context(obs: ArrayView2<'_, f64>, window: usize) -> Result<Array2<f64>> {
    let (dims, steps) = obs.dim();
    if steps == 0 {
        return Err(Error::Domain("cannot splice an empty sequence".into()));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Domain(format!("context window must be odd, got {window}")));
    }
    let half = (window / 2) as isize;
    let mut out = Array2::zeros((steps, dims * window));
    for k in 0..steps as isize {
        let mut row = out.row_mut(k as usize);
        for (slot, offset) in (-half..=half).enumerate() {
            let src = (k + offset).clamp(0, steps as isize - 1) as usize;
            for d in 0..dims {
                row[slot * dims + d] = obs[[d, src]];
            }
        }
    }
    Ok(out)
}

/// Uniform segmentation of `len` steps into `states` states: one-based step
/// `k` gets one-based state `⌈k·S/K⌉`. Returned states are zero-based.
pub fn flat_start_align(len: usize, states: usize) -> Result<Vec<usize>> {
    if states == 0 {
        return Err(Error::Domain("need at least one state".into()));
    }
    if len < states {
        return Err(Error::Domain(format!(
            "sequence shorter than state count: {len} < {states}"
        )));
    }
    Ok((1..=len).map(|k| (k * states).div_ceil(len) - 1).collect())
}
