//! Naive reference implementations used as test oracles. Each one follows
//! the textbook definition with plain loops and 1-based indices where the
//! definition is written that way.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ssr_core::frames::{FrameKind, FrameSet};
use ssr_core::hmm::mlp::{flatten, Mlp, MlpSpec};

pub fn random_raw_frameset<R: Rng>(rng: &mut R, frames: usize, bins: usize) -> FrameSet {
    let data = Array2::from_shape_fn((frames, bins), |_| rng.random_range(0.0f32..=100.0));
    FrameSet::new(data, 200.0, 1.0, FrameKind::Raw).unwrap()
}

pub fn vectorize(data: ArrayView2<'_, f64>) -> Vec<f64> {
    let (m, n) = data.dim();
    let mut f = vec![0.0; m * n];
    for mm in 1..=m {
        for nn in 1..=n {
            f[(mm - 1) * n + nn - 1] = data[[mm - 1, nn - 1]];
        }
    }
    f
}

pub fn rms_envelope(f: &[f64], w: usize) -> Vec<f64> {
    let len = f.len() as i64;
    let half = (w / 2) as i64;
    (1..=len)
        .map(|j| {
            let mut sum = 0.0;
            let mut i = (j - half).max(1);
            while i <= (j + half - 1).min(len) {
                sum += f[(i - 1) as usize] * f[(i - 1) as usize];
                i += 1;
            }
            (sum / w as f64).sqrt()
        })
        .collect()
}

pub fn downsample(e: &[f64], d: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1;
    while d * k <= e.len() {
        out.push(e[d * k - 1]);
        k += 1;
    }
    out
}

pub fn remove_dc(v: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    for x in v {
        total += x;
    }
    let mean = total / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

pub fn delta(z: &[f64], l: usize) -> Vec<f64> {
    let h = (l / 2) as i64;
    let mut denom = 0.0;
    for q in -h..=h {
        denom += (q * q) as f64;
    }
    let k_len = z.len() as i64;
    (0..k_len)
        .map(|k| {
            let mut num = 0.0;
            for q in -h..=h {
                let idx = k + q;
                let v = if idx < 0 || idx >= k_len { 0.0 } else { z[idx as usize] };
                num += q as f64 * v;
            }
            num / denom
        })
        .collect()
}

/// `c_m = α c_{m-1} + (1-α) r_m`, `y_m = r_m - c_m`, with `c_0` given.
pub fn clutter_reduce(raw: ArrayView2<'_, f64>, alpha: f64, c0: &[f64]) -> Array2<f64> {
    let (m, n) = raw.dim();
    let mut out = Array2::zeros((m, n));
    for bin in 0..n {
        let mut c = c0[bin];
        for row in 0..m {
            c = alpha * c + (1.0 - alpha) * raw[[row, bin]];
            out[[row, bin]] = raw[[row, bin]] - c;
        }
    }
    out
}

/// The six FERASEC rows, stage by stage with the oracles above.
pub fn ferasec(raw: ArrayView2<'_, f64>, alpha: f64, w: usize, d: usize, l: usize) -> Vec<Vec<f64>> {
    let c0: Vec<f64> = raw.row(0).to_vec();
    let reduced = clutter_reduce(raw, alpha, &c0);
    let z1 = remove_dc(&downsample(&rms_envelope(&vectorize(raw), w), d));
    let z2 = remove_dc(&downsample(&rms_envelope(&vectorize(reduced.view()), w), d));
    let d1 = delta(&z1, l);
    let d2 = delta(&z2, l);
    let dd1 = delta(&d1, l);
    let dd2 = delta(&d2, l);
    vec![z1, z2, d1, d2, dd1, dd2]
}

pub fn pearson(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut sp = 0.0;
    let mut sq = 0.0;
    for i in 0..p.len() {
        num += (p[i] - mp) * (q[i] - mq);
        sp += (p[i] - mp) * (p[i] - mp);
        sq += (q[i] - mq) * (q[i] - mq);
    }
    num / (sp.sqrt() * sq.sqrt())
}

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn manhattan(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

/// Minimum cost over every monotone path from the first to the last cell,
/// enumerated recursively.
pub fn dtw_brute(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, metric: fn(&[f64], &[f64]) -> f64) -> f64 {
    fn walk(i: usize, j: usize, cost: &Array2<f64>, acc: f64, best: &mut f64) {
        let acc = acc + cost[[i, j]];
        let (a, b) = cost.dim();
        if i + 1 == a && j + 1 == b {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < a {
            walk(i + 1, j, cost, acc, best);
        }
        if j + 1 < b {
            walk(i, j + 1, cost, acc, best);
        }
        if i + 1 < a && j + 1 < b {
            walk(i + 1, j + 1, cost, acc, best);
        }
    }
    let (k1, k2) = (x.ncols(), y.ncols());
    let cost = Array2::from_shape_fn((k1, k2), |(i, j)| {
        metric(&x.column(i).to_vec(), &y.column(j).to_vec())
    });
    let mut best = f64::INFINITY;
    walk(0, 0, &cost, 0.0, &mut best);
    best
}

/// Best score and path over every state sequence that starts in state 0,
/// ends in state S-1 and moves by 0 or +1 per step.
pub fn viterbi_brute(log_trans: ArrayView2<'_, f64>, emissions: ArrayView2<'_, f64>) -> Option<(f64, Vec<usize>)> {
    let (k, s) = emissions.dim();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut path = vec![0usize; k];
    fn rec(
        t: usize,
        path: &mut Vec<usize>,
        lt: ArrayView2<'_, f64>,
        em: ArrayView2<'_, f64>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let (k, s) = em.dim();
        if t == k {
            if path[k - 1] != s - 1 {
                return;
            }
            let mut score = em[[0, path[0]]];
            for i in 1..k {
                score += lt[[path[i - 1], path[i]]] + em[[i, path[i]]];
            }
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                *best = Some((score, path.clone()));
            }
            return;
        }
        let prev = path[t - 1];
        for next in [prev, prev + 1] {
            if next < s {
                path[t] = next;
                rec(t + 1, path, lt, em, best);
            }
        }
    }
    if k < s {
        return None;
    }
    path[0] = 0;
    if k == 1 {
        return (s == 1).then(|| (emissions[[0, 0]], vec![0]));
    }
    rec(1, &mut path, log_trans, emissions, &mut best);
    best
}

pub fn finite_difference<F: FnMut(&[f64]) -> f64>(params: &[f64], h: f64, mut loss: F) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// Random small network, input batch and targets.
pub fn gradient_instance(rng: &mut ChaCha8Rng) -> (Mlp<f64>, Array2<f64>, Vec<usize>) {
    let input_dim = rng.random_range(1..=12);
    let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=8)).collect();
    let output_dim = rng.random_range(2..=10);
    let spec = MlpSpec {
        input_dim,
        hidden,
        output_dim,
    };
    let mut mlp = Mlp::<f64>::glorot(&spec, rng).unwrap();
    // nonzero biases so that rectifiers sit away from their kink
    let mut p = mlp.params();
    for v in p.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    mlp.set_params(&p).unwrap();
    let batch = rng.random_range(1..=6);
    let x = Array2::from_shape_fn((batch, input_dim), |_| rng.random_range(-2.0..2.0));
    let t = (0..batch).map(|_| rng.random_range(0..output_dim)).collect();
    (mlp, x, t)
}

pub fn gradient_error(mlp: &Mlp<f64>, x: &Array2<f64>, t: &[usize]) -> f64 {
    let (_, grads) = mlp.loss_and_gradients(x.view(), t).unwrap();
    let analytic = flatten(&grads);
    let mut probe = mlp.clone();
    let numeric = finite_difference(&mlp.params(), 1e-5, |p| {
        probe.set_params(p).unwrap();
        probe.loss_and_gradients(x.view(), t).unwrap().0
    });
    relative_error(&analytic, &numeric)
}
