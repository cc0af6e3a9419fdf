mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssr_core::ferasec::{
    delta, downsample, extract_features, remove_dc, rms_envelope, vectorize, FerasecConfig,
};
use ssr_core::frames::{FrameKind, FrameSet};
use ssr_core::synth::{render_frameset, GestureScript, Reflector, SimConfig};

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn assert_rows_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    let scale = max_abs(want).max(f64::MIN_POSITIVE);
    for (i, (a, b)) in got.iter().zip(want).enumerate() {
        assert!((a - b).abs() <= tol * scale, "index {i}: {a} vs {b}");
    }
}

#[test]
fn staged_oracle_on_single_reflector() {
    let script = GestureScript {
        label: "one".into(),
        reflectors: vec![Reflector {
            base_distance_m: 0.2,
            bumps: vec![ssr_core::synth::Bump {
                center_s: 0.4,
                width_s: 0.1,
                amplitude_m: 0.05,
            }],
            reflectivity: 0.8,
        }],
        duration_s: 1.0,
    };
    let fs = render_frameset(&script, &SimConfig::default(), 3).unwrap();
    let cfg = FerasecConfig::default();
    let got = extract_features(&fs, &cfg, 0.95).unwrap();
    let want = common::ferasec(fs.to_f64().view(), 0.95, 400, 1024, 9);
    assert_eq!(got.len(), fs.frames() / 4);
    for (r, row) in want.iter().enumerate() {
        assert_rows_close(&got.row(r).to_vec(), row, 1e-12);
    }
}

#[test]
fn default_config_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fs = common::random_raw_frameset(&mut rng, 600, 256);
    let f = extract_features(&fs, &FerasecConfig::default(), 0.95).unwrap();
    assert_eq!(f.view().dim(), (6, 150));
    let e: Vec<f64> = (1..=10).map(f64::from).collect();
    assert_eq!(downsample(&e, 3).unwrap(), vec![3.0, 6.0, 9.0]);
}

#[test]
fn zero_frameset_gives_zero_features() {
    let fs = FrameSet::new(Array2::zeros((40, 256)), 200.0, 1.0, FrameKind::Raw).unwrap();
    let f = extract_features(&fs, &FerasecConfig::default(), 0.95).unwrap();
    assert_eq!(f.len(), 10);
    assert!(f.view().iter().all(|&v| v == 0.0));
}

#[test]
fn too_short_is_rejected() {
    let fs = FrameSet::new(Array2::zeros((3, 256)), 200.0, 1.0, FrameKind::Raw).unwrap();
    let err = extract_features(&fs, &FerasecConfig::default(), 0.95).unwrap_err();
    assert!(err.to_string().contains("frame set too short"));
}

#[test]
fn impulse_envelope() {
    let mut f = vec![0.0; 12];
    f[5] = 1.0;
    let e = rms_envelope(&f, 4).unwrap();
    // zero-based window of j is [j-2, j+1], so index 5 is covered for j in 4..=7
    for (j, v) in e.iter().enumerate() {
        let want = if (4..=7).contains(&j) { 0.5 } else { 0.0 };
        assert_eq!(*v, want, "j={j}");
    }
    assert_rows_close(&e, &common::rms_envelope(&f, 4), 0.0);
}

#[test]
fn ramp_delta_is_one_in_interior() {
    let z: Vec<f64> = (0..30).map(f64::from).collect();
    let d = delta(&z, 9).unwrap();
    for v in &d[4..26] {
        assert!((v - 1.0).abs() < 1e-14);
    }
}

/// Small configs keep the vectors short enough for exhaustive checks.
fn small_cfg() -> impl Strategy<Value = FerasecConfig> {
    (1usize..8, 1usize..40, 1usize..5).prop_map(|(w, d, l)| FerasecConfig {
        window: 2 * w,
        downsample: d,
        delta_window: 2 * l + 1,
    })
}

proptest! {
    #[test]
    fn stage_oracles(f in prop::collection::vec(-50.0f64..50.0, 1..300), w in 1usize..40, d in 1usize..20, l in 1usize..6) {
        let w = 2 * w;
        let l = 2 * l + 1;
        let e = rms_envelope(&f, w).unwrap();
        assert_rows_close(&e, &common::rms_envelope(&f, w), 1e-12);
        let bound = max_abs(&f) * ((w.min(f.len()) as f64) / w as f64).sqrt();
        prop_assert!(e.iter().all(|&v| v >= 0.0 && v <= bound * (1.0 + 1e-12)));
        if f.len() >= d {
            let v = downsample(&e, d).unwrap();
            prop_assert_eq!(&v, &common::downsample(&e, d));
            let z = remove_dc(&v).unwrap();
            assert_rows_close(&z, &common::remove_dc(&v), 1e-12);
            assert_rows_close(&delta(&z, l).unwrap(), &common::delta(&z, l), 1e-12);
        } else {
            prop_assert!(downsample(&e, d).is_err());
        }
    }

    #[test]
    fn shape_dc_and_oracle(m in 1usize..40, n in 1usize..24, cfg in small_cfg(), seed in any::<u64>()) {
        prop_assume!(m * n >= cfg.downsample);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = common::random_raw_frameset(&mut rng, m, n);
        let f = extract_features(&fs, &cfg, 0.95).unwrap();
        prop_assert_eq!(f.view().dim(), (6, m * n / cfg.downsample));
        for r in 0..2 {
            let row = f.row(r).to_vec();
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            prop_assert!(mean.abs() <= 1e-9 * max_abs(&row).max(f64::MIN_POSITIVE));
        }
        let want = common::ferasec(fs.to_f64().view(), 0.95, cfg.window, cfg.downsample, cfg.delta_window);
        for (r, row) in want.iter().enumerate() {
            assert_rows_close(&f.row(r).to_vec(), row, 1e-12);
        }
    }

    #[test]
    fn positive_homogeneity(seed in any::<u64>(), a in 0.1f32..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = common::random_raw_frameset(&mut rng, 20, 64);
        let scaled = FrameSet::new(fs.data().mapv(|v| v * a), 200.0, 1.0, FrameKind::Raw).unwrap();
        let cfg = FerasecConfig { window: 40, downsample: 32, delta_window: 5 };
        let base = extract_features(&fs, &cfg, 0.95).unwrap();
        let got = extract_features(&scaled, &cfg, 0.95).unwrap();
        // rescaled amplitudes are stored as f32, so compare at f32 precision
        for r in 0..6 {
            let want: Vec<f64> = base.row(r).iter().map(|v| v * f64::from(a)).collect();
            assert_rows_close(&got.row(r).to_vec(), &want, 1e-5);
        }
    }

    #[test]
    fn vectorize_index(m in 1usize..8, n in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = common::random_raw_frameset(&mut rng, m, n);
        let v = vectorize(&fs);
        prop_assert_eq!(&v, &common::vectorize(fs.to_f64().view()));
        for mm in 1..=m {
            for nn in 1..=n {
                prop_assert_eq!(v[(mm - 1) * n + nn - 1], f64::from(fs.data()[[mm - 1, nn - 1]]));
            }
        }
    }

    #[test]
    fn constant_delta_vanishes_inside(c in -10.0f64..10.0, len in 9usize..50) {
        let d = delta(&vec![c; len], 9).unwrap();
        for v in &d[4..len - 4] {
            prop_assert!(v.abs() < 1e-12);
        }
    }
}
