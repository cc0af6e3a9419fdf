//! Browser bindings for the radar speech pipeline.
//!
//! Three operations back the demo page: render a synthetic utterance with its
//! clutter-reduced frames and features, recognize one against a reference per
//! vowel, and run the articulator positioning check.

use ssr_core::clutter::{reduce_frameset, DEFAULT_ALPHA};
use ssr_core::dtw::{mddtw_distance, DtwConfig, LocalMetric};
use ssr_core::ferasec::extract_features;
use ssr_core::frames::positioning_check;
use ssr_core::synth::{item_seed, preset_config, render_frameset, vowel8_scripts, Difficulty, GestureScript, VOWEL8_LABELS};
use ssr_core::{FerasecConfig, FrameSet};
use wasm_bindgen::prelude::*;

const REFERENCE_STREAM: u64 = 0x5245_4653;

fn script(label: &str, difficulty: Difficulty) -> Result<GestureScript, String> {
    vowel8_scripts(difficulty)
        .into_iter()
        .find(|s| s.label == label)
        .ok_or_else(|| format!("unknown vowel {label:?}; expected one of {}", VOWEL8_LABELS.join(", ")))
}

fn difficulty(name: &str) -> Result<Difficulty, String> {
    name.parse::<Difficulty>().map_err(|e| e.to_string())
}

fn render(label: &str, level: Difficulty, seed: u64) -> Result<FrameSet, String> {
    render_frameset(&script(label, level)?, &preset_config(level), seed).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct Utterance {
    frames: usize,
    bins: usize,
    raw: Vec<f32>,
    reduced: Vec<f32>,
    features: Vec<f64>,
    feature_len: usize,
}

#[wasm_bindgen]
impl Utterance {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[wasm_bindgen(getter)]
    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Row-major `frames × bins` amplitudes.
    #[wasm_bindgen(getter)]
    pub fn raw(&self) -> Vec<f32> {
        self.raw.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn reduced(&self) -> Vec<f32> {
        self.reduced.clone()
    }

    /// Row-major `6 × feature_len` feature matrix.
    #[wasm_bindgen(getter)]
    pub fn features(&self) -> Vec<f64> {
        self.features.clone()
    }

    #[wasm_bindgen(getter, js_name = featureLen)]
    pub fn feature_len(&self) -> usize {
        self.feature_len
    }
}

/// Renders one utterance of `label` at a difficulty of `easy`, `medium` or `hard`.
#[wasm_bindgen]
pub fn simulate(label: &str, level: &str, seed: u32) -> Result<Utterance, String> {
    let raw = render(label, difficulty(level)?, u64::from(seed))?;
    let reduced = reduce_frameset(&raw, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let features = extract_features(&raw, &FerasecConfig::default(), DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    Ok(Utterance {
        frames: raw.frames(),
        bins: raw.bins(),
        raw: raw.data().iter().copied().collect(),
        reduced: reduced.data().iter().copied().collect(),
        feature_len: features.len(),
        features: features.view().iter().copied().collect(),
    })
}

#[wasm_bindgen]
pub struct Recognition {
    labels: Vec<String>,
    distances: Vec<f64>,
    best: usize,
}

#[wasm_bindgen]
impl Recognition {
    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn distances(&self) -> Vec<f64> {
        self.distances.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn best(&self) -> usize {
        self.best
    }

    #[wasm_bindgen(getter)]
    pub fn predicted(&self) -> String {
        self.labels[self.best].clone()
    }
}

/// MD-DTW distance from a test utterance of `label` to one reference
/// utterance per vowel. References are drawn from a separate seed stream.
#[wasm_bindgen]
pub fn recognize(label: &str, level: &str, seed: u32, manhattan: bool) -> Result<Recognition, String> {
    let level = difficulty(level)?;
    let fcfg = FerasecConfig::default();
    let dcfg = DtwConfig {
        local_metric: if manhattan { LocalMetric::Manhattan } else { LocalMetric::Euclidean },
    };
    let features = |fs: &FrameSet| extract_features(fs, &fcfg, DEFAULT_ALPHA).map_err(|e| e.to_string());
    let test = features(&render(label, level, u64::from(seed))?)?;
    let mut distances = Vec::with_capacity(VOWEL8_LABELS.len());
    for (i, vowel) in VOWEL8_LABELS.iter().enumerate() {
        let refseed = item_seed(REFERENCE_STREAM ^ u64::from(seed), i as u64);
        let reference = features(&render(vowel, level, refseed)?)?;
        distances.push(mddtw_distance(&test, &reference, &dcfg).map_err(|e| e.to_string())?);
    }
    // earliest class wins ties
    let best = distances
        .iter()
        .enumerate()
        .fold(0, |b, (i, &d)| if d < distances[b] { i } else { b });
    Ok(Recognition {
        labels: VOWEL8_LABELS.iter().map(|s| s.to_string()).collect(),
        distances,
        best,
    })
}

#[wasm_bindgen]
pub struct Positioning {
    rho: f64,
    pass: bool,
    reference: Vec<f32>,
    live: Vec<f32>,
}

#[wasm_bindgen]
impl Positioning {
    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[wasm_bindgen(getter)]
    pub fn pass(&self) -> bool {
        self.pass
    }

    #[wasm_bindgen(getter)]
    pub fn reference(&self) -> Vec<f32> {
        self.reference.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn live(&self) -> Vec<f32> {
        self.live.clone()
    }
}

/// Compares the resting frame of a face moved by `offset_mm` (positive is
/// farther from the radar) with the resting frame at the preset position.
#[wasm_bindgen(js_name = positionCheck)]
pub fn position_check(offset_mm: f64, threshold: f64, seed: u32) -> Result<Positioning, String> {
    if !offset_mm.is_finite() {
        return Err(format!("offset must be finite, got {offset_mm}"));
    }
    let level = Difficulty::Easy;
    let preset = script("a", level)?;
    let mut moved = preset.clone();
    for r in &mut moved.reflectors {
        r.base_distance_m += offset_mm / 1000.0;
    }
    let cfg = preset_config(level);
    let seed = u64::from(seed);
    let first = |s: &GestureScript, seed| -> Result<_, String> {
        Ok(render_frameset(s, &cfg, seed).map_err(|e| e.to_string())?.frame_owned(0))
    };
    let reference = first(&preset, seed)?;
    let live = first(&moved, item_seed(seed, 1))?;
    let check = positioning_check(&reference, &live, threshold).map_err(|e| e.to_string())?;
    Ok(Positioning {
        rho: check.rho,
        pass: check.pass,
        reference: reference.amplitudes().to_vec(),
        live: live.amplitudes().to_vec(),
    })
}
