//! Max-product decoding over a state lattice in log space.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub log_likelihood: f64,
    /// Zero-based state per time step.
    pub path: Vec<usize>,
}

/// Best path through `emissions` (`K × S` log scores) under `log_trans`
/// (`S × S`), entering in the first state and leaving from the last.
pub fn viterbi(log_trans: ArrayView2<'_, f64>, emissions: ArrayView2<'_, f64>) -> Result<Decoded> {
    let (steps, states) = emissions.dim();
    if log_trans.dim() != (states, states) {
        return Err(Error::Dimension(format!(
            "transition matrix is {:?} for {states} states",
            log_trans.dim()
        )));
    }
    if states == 0 {
        return Err(Error::Domain("lattice has no states".into()));
    }
    if steps < states {
        return Err(Error::Domain(format!(
            "sequence of {steps} steps cannot traverse {states} states"
        )));
    }
    if emissions.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN emission score".into()));
    }

    let mut score = vec![f64::NEG_INFINITY; states];
    score[0] = emissions[[0, 0]];
    let mut back = vec![0usize; steps * states];
    let mut next = vec![f64::NEG_INFINITY; states];
    for k in 1..steps {
        for to in 0..states {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for from in 0..states {
                let cand = score[from] + log_trans[[from, to]];
                if cand > best {
                    best = cand;
                    arg = from;
                }
            }
            next[to] = best + emissions[[k, to]];
            back[k * states + to] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let log_likelihood = score[states - 1];
    if log_likelihood == f64::NEG_INFINITY {
        return Err(Error::Numeric("no path reaches the final state".into()));
    }
    if !log_likelihood.is_finite() {
        return Err(Error::Numeric(format!("path score is {log_likelihood}")));
    }
    let mut path = vec![0; steps];
    let mut s = states - 1;
    for k in (0..steps).rev() {
        path[k] = s;
        if k > 0 {
            s = back[k * states + s];
        }
    }
    Ok(Decoded { log_likelihood, path })
}
