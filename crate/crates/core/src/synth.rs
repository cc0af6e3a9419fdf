//! Synthetic frame-set generator.
//!
//! Articulators are modelled as point reflectors whose distance from the
//! antenna follows a baseline plus Gaussian bumps in time. Each reflector
//! renders as a Gaussian echo in fast time on top of a static clutter profile
//! and white noise. Everything is driven by explicit seeds so a corpus is a
//! pure function of its inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::frames::{store_frameset, FrameKind, FrameSet, RAW_AMPLITUDE_MAX};
use crate::manifest::{CorpusManifest, ManifestEntry, RadarPosition};

/// A Gaussian displacement pulse: `amplitude_m · exp(-(t - center)² / 2·width²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center_s: f64,
    pub width_s: f64,
    pub amplitude_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub base_distance_m: f64,
    pub bumps: Vec<Bump>,
    pub reflectivity: f64,
}

impl Reflector {
    /// Distance at utterance time `t` (seconds).
    pub fn distance_at(&self, t: f64) -> f64 {
        self.base_distance_m
            + self
                .bumps
                .iter()
                .map(|b| b.amplitude_m * (-(t - b.center_s).powi(2) / (2.0 * b.width_s * b.width_s)).exp())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureScript {
    pub label: String,
    pub reflectors: Vec<Reflector>,
    pub duration_s: f64,
}

impl GestureScript {
    pub fn validate(&self, range_m: f64) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Domain(format!("script {:?}: duration must be positive", self.label)));
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if !(r.reflectivity > 0.0 && r.reflectivity <= 1.0) {
                return Err(Error::Domain(format!(
                    "script {:?}: reflector {i} reflectivity {} outside (0, 1]",
                    self.label, r.reflectivity
                )));
            }
            if r.bumps.iter().any(|b| !(b.width_s > 0.0)) {
                return Err(Error::Domain(format!("script {:?}: bump width must be positive", self.label)));
            }
            let _ = range_m;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub frame_rate_hz: f64,
    pub bins: usize,
    pub range_m: f64,
    /// Standard deviation of the echo pulse, in fast-time bins.
    pub pulse_width_bins: f64,
    /// Peak echo amplitude of a reflector with reflectivity 1.
    pub echo_amplitude: f64,
    /// Static amplitude per fast-time bin.
    pub clutter: Vec<f64>,
    pub noise_sigma: f64,
    pub onset_jitter_s: f64,
    pub duration_jitter_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let bins = crate::frames::DEFAULT_BINS;
        SimConfig {
            frame_rate_hz: 200.0,
            bins,
            range_m: 1.0,
            pulse_width_bins: 2.0,
            echo_amplitude: 40.0,
            clutter: default_clutter(bins),
            noise_sigma: 0.5,
            onset_jitter_s: 0.2,
            duration_jitter_fraction: 0.1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate_hz > 0.0) || !(self.range_m > 0.0) || self.bins == 0 {
            return Err(Error::Domain("frame rate, range and bin count must be positive".into()));
        }
        if self.clutter.len() != self.bins {
            return Err(Error::Dimension(format!(
                "clutter profile has {} bins, config has {}",
                self.clutter.len(),
                self.bins
            )));
        }
        if !(self.pulse_width_bins > 0.0) {
            return Err(Error::Domain("pulse width must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.onset_jitter_s >= 0.0) {
            return Err(Error::Domain("noise and onset jitter must be non-negative".into()));
        }
        if !(0.0..0.5).contains(&self.duration_jitter_fraction) {
            return Err(Error::Domain(format!(
                "duration jitter {} outside [0, 0.5)",
                self.duration_jitter_fraction
            )));
        }
        Ok(())
    }
}

/// Three static reflections across fast time, peaking at 55.
pub fn default_clutter(bins: usize) -> Vec<f64> {
    let n = bins as f64;
    let lobes = [(0.06 * n, 3.0, 55.0), (0.30 * n, 10.0, 30.0), (0.60 * n, 20.0, 20.0)];
    (1..=bins)
        .map(|bin| {
            lobes
                .iter()
                .map(|&(c, w, a)| a * (-((bin as f64 - c).powi(2)) / (2.0 * w * w)).exp())
                .sum()
        })
        .collect()
}

/// Renders one raw frame set. Onset and duration jitter are drawn from `seed`
/// and the utterance is shifted and stretched accordingly.
pub fn render_frameset(script: &GestureScript, cfg: &SimConfig, seed: u64) -> Result<FrameSet> {
    cfg.validate()?;
    script.validate(cfg.range_m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stretch = if cfg.duration_jitter_fraction > 0.0 {
        1.0 + rng.random_range(-cfg.duration_jitter_fraction..cfg.duration_jitter_fraction)
    } else {
        1.0
    };
    let onset = if cfg.onset_jitter_s > 0.0 {
        rng.random_range(0.0..cfg.onset_jitter_s)
    } else {
        0.0
    };
    let duration = onset + script.duration_s * stretch;
    let frames = (duration * cfg.frame_rate_hz).round().max(1.0) as usize;
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Domain(e.to_string()))?)
    } else {
        None
    };

    let n = cfg.bins;
    let two_var = 2.0 * cfg.pulse_width_bins * cfg.pulse_width_bins;
    let mut data = Array2::<f32>::zeros((frames, n));
    let mut centers = vec![0.0; script.reflectors.len()];
    for m in 0..frames {
        let t = m as f64 / cfg.frame_rate_hz;
        let tau = (t - onset) / stretch;
        for (c, r) in centers.iter_mut().zip(&script.reflectors) {
            let d = r.distance_at(tau);
            if !(d > 0.0 && d < cfg.range_m) {
                return Err(Error::Domain(format!(
                    "script {:?}: reflector leaves the detection range ({d:.4} m at {t:.3} s)",
                    script.label
                )));
            }
            *c = d / cfg.range_m * n as f64;
        }
        let mut row = data.row_mut(m);
        for (idx, out) in row.iter_mut().enumerate() {
            let bin = (idx + 1) as f64;
            let mut v = cfg.clutter[idx];
            for (c, r) in centers.iter().zip(&script.reflectors) {
                v += r.reflectivity * cfg.echo_amplitude * (-(bin - c).powi(2) / two_var).exp();
            }
            if let Some(dist) = &noise {
                v += dist.sample(&mut rng);
            }
            *out = v.clamp(0.0, f64::from(RAW_AMPLITUDE_MAX)) as f32;
        }
    }
    Ok(FrameSet::new(data, cfg.frame_rate_hz as f32, cfg.range_m as f32, FrameKind::Raw)?
        .with_label(script.label.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Difficulty {
    #[default]
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    /// Fraction of the nominal inter-class trajectory differences kept.
    pub fn separation(self) -> f64 {
        match self {
            Difficulty::Easy => 1.0,
            Difficulty::Medium => 0.6,
            Difficulty::Hard => 0.35,
        }
    }

    pub fn noise_sigma(self) -> f64 {
        match self {
            Difficulty::Easy => 0.5,
            Difficulty::Medium => 1.5,
            Difficulty::Hard => 3.0,
        }
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::Domain(format!("unknown difficulty {other:?}"))),
        }
    }
}

pub const VOWEL8_LABELS: [&str; 8] = ["a", "ae", "e", "eo", "eu", "i", "o", "u"];

/// Lip and tongue bump per class: (lip center, lip amplitude, tongue center,
/// tongue amplitude). Times in seconds, amplitudes in meters.
const VOWEL8_TABLE: [(f64, f64, f64, f64); 8] = [
    (0.30, 0.030, 0.65, 0.025),
    (0.30, -0.030, 0.65, -0.025),
    (0.65, 0.030, 0.30, 0.025),
    (0.65, -0.030, 0.30, -0.025),
    (0.45, 0.045, 0.45, -0.015),
    (0.45, -0.015, 0.45, 0.045),
    (0.25, 0.020, 0.75, -0.035),
    (0.75, -0.020, 0.25, 0.035),
];

/// Eight classes with distinct two-bump trajectories. Inter-class differences
/// are scaled toward the class mean by the difficulty's separation factor.
pub fn vowel8_scripts(difficulty: Difficulty) -> Vec<GestureScript> {
    let sep = difficulty.separation();
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| VOWEL8_TABLE.iter().map(f).sum::<f64>() / 8.0;
    let means = [mean(|r| r.0), mean(|r| r.1), mean(|r| r.2), mean(|r| r.3)];
    let pull = |v: f64, m: f64| m + sep * (v - m);
    VOWEL8_LABELS
        .iter()
        .zip(VOWEL8_TABLE.iter())
        .map(|(label, row)| GestureScript {
            label: label.to_string(),
            duration_s: 1.0,
            reflectors: vec![
                Reflector {
                    base_distance_m: 0.10,
                    reflectivity: 0.9,
                    bumps: vec![Bump {
                        center_s: pull(row.0, means[0]),
                        width_s: 0.08,
                        amplitude_m: pull(row.1, means[1]),
                    }],
                },
                Reflector {
                    base_distance_m: 0.17,
                    reflectivity: 0.6,
                    bumps: vec![Bump {
                        center_s: pull(row.2, means[2]),
                        width_s: 0.10,
                        amplitude_m: pull(row.3, means[3]),
                    }],
                },
            ],
        })
        .collect()
}

/// Simulation settings for a preset difficulty.
pub fn preset_config(difficulty: Difficulty) -> SimConfig {
    SimConfig {
        noise_sigma: difficulty.noise_sigma(),
        ..SimConfig::default()
    }
}

/// Per-item seed derived from the corpus seed (SplitMix64 finalizer).
pub fn item_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One rendered corpus item.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub entry: ManifestEntry,
    pub frameset: FrameSet,
}

/// Renders `reps` repetitions of every script in memory, class-major.
pub fn render_corpus(scripts: &[GestureScript], reps: usize, cfg: &SimConfig, master_seed: u64) -> Result<Vec<CorpusItem>> {
    if scripts.len() < 2 {
        return Err(Error::Domain(format!("corpus needs at least 2 classes, got {}", scripts.len())));
    }
    if reps < 2 {
        return Err(Error::Domain(format!("corpus needs at least 2 repetitions, got {reps}")));
    }
    let mut items = Vec::with_capacity(scripts.len() * reps);
    for (c, script) in scripts.iter().enumerate() {
        for rep in 0..reps {
            let seed = item_seed(master_seed, (c * reps + rep) as u64);
            let frameset = render_frameset(script, cfg, seed)?;
            let entry = ManifestEntry {
                path: PathBuf::from(format!("{}/{}_{:02}.frs", script.label, script.label, rep)),
                label: script.label.clone(),
                repetition: rep as u32,
                position: RadarPosition::Upper,
                seed,
            };
            items.push(CorpusItem { entry, frameset });
        }
    }
    Ok(items)
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Writes a rendered corpus under `out_dir` with its manifest.
pub fn generate_corpus(
    scripts: &[GestureScript],
    reps: usize,
    cfg: &SimConfig,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_dir = out_dir.as_ref();
    let items = render_corpus(scripts, reps, cfg, master_seed)?;
    for item in &items {
        let path = out_dir.join(&item.entry.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        store_frameset(&item.frameset, path)?;
    }
    let manifest = CorpusManifest::new(items.into_iter().map(|i| i.entry).collect())?;
    manifest.store(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Parses gesture scripts from text.
///
/// ```text
/// class a 1.0
/// 0.10; bump(0.30,0.08,0.03); 0.9
/// 0.17; bump(0.65,0.10,0.025) bump(0.8,0.05,-0.01); 0.6
/// ```
///
/// A `class <label> <duration_s>` line opens a script; every following line
/// is one reflector: base distance, zero or more bumps, reflectivity. Blank
/// lines and `#` comments are skipped.
pub fn parse_scripts(text: &str) -> Result<Vec<GestureScript>> {
    let mut scripts: Vec<GestureScript> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Domain(format!("script line {}: {msg}", i + 1));
        if let Some(rest) = line.strip_prefix("class ") {
            let mut parts = rest.split_whitespace();
            let label = parts.next().ok_or_else(|| bad("missing class label"))?;
            let duration_s = parts
                .next()
                .ok_or_else(|| bad("missing duration"))?
                .parse()
                .map_err(|_| bad("duration is not a number"))?;
            scripts.push(GestureScript {
                label: label.to_string(),
                reflectors: Vec::new(),
                duration_s,
            });
            continue;
        }
        let script = scripts
            .last_mut()
            .ok_or_else(|| bad("reflector before any `class` line"))?;
        let fields: Vec<&str> = line.split(';').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad("reflector needs `base; bumps; reflectivity`"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
        let mut bumps = Vec::new();
        let mut rest = fields[1];
        while let Some(start) = rest.find("bump(") {
            let after = &rest[start + 5..];
            let end = after.find(')').ok_or_else(|| bad("unclosed bump("))?;
            let args: Vec<&str> = after[..end].split(',').collect();
            if args.len() != 3 {
                return Err(bad("bump takes (center, width, amplitude)"));
            }
            bumps.push(Bump {
                center_s: num(args[0])?,
                width_s: num(args[1])?,
                amplitude_m: num(args[2])?,
            });
            rest = &after[end + 1..];
        }
        if !rest.trim().is_empty() {
            return Err(bad(&format!("unexpected text {:?}", rest.trim())));
        }
        script.reflectors.push(Reflector {
            base_distance_m: num(fields[0])?,
            bumps,
            reflectivity: num(fields[2])?,
        });
    }
    if scripts.is_empty() {
        return Err(Error::Domain("no scripts found".into()));
    }
    Ok(scripts)
}

pub fn render_scripts(scripts: &[GestureScript]) -> String {
    let mut out = String::new();
    for s in scripts {
        let _ = writeln!(out, "class {} {}", s.label, s.duration_s);
        for r in &s.reflectors {
            let bumps: Vec<String> = r
                .bumps
                .iter()
                .map(|b| format!("bump({},{},{})", b.center_s, b.width_s, b.amplitude_m))
                .collect();
            let _ = writeln!(out, "{}; {}; {}", r.base_distance_m, bumps.join(" "), r.reflectivity);
        }
    }
    out
}
