//! `ssr`: generate synthetic corpora, extract features, train, classify,
//! evaluate and check radar placement.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssr_core::clutter::DEFAULT_ALPHA;
use ssr_core::dtw::{classify_1nn, DtwConfig, LocalMetric};
use ssr_core::ferasec::{extract_features, load_features, store_features, FeatureMatrix, FerasecConfig, FEATURE_MAGIC};
use ssr_core::frames::{load_frameset, positioning_check, DEFAULT_AID_THRESHOLD};
use ssr_core::harness::{load_corpus, loocv, render_comparison, EvalConfig, HmmProtocol, Method};
use ssr_core::hmm::{load_model, store_model, train, Example, TrainConfig};
use ssr_core::manifest::{CorpusManifest, RadarPosition};
use ssr_core::synth::{generate_corpus, parse_scripts, preset_config, vowel8_scripts, Difficulty};
use ssr_core::Error;

/// Faithful leave-one-out is the default up to this many items.
const FAITHFUL_LIMIT: usize = 200;

#[derive(Parser)]
#[command(name = "ssr", version, about = "IR-UWB radar silent speech recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic labelled corpus and its manifest.
    Generate(GenerateArgs),
    /// Compute the six-row feature matrix of a raw frame set.
    Extract(ExtractArgs),
    /// Train a hybrid network/HMM model on a corpus.
    Train(TrainArgs),
    /// Classify one feature matrix or raw frame set.
    Classify(ClassifyArgs),
    /// Leave-one-out evaluation with accuracy and confusion report.
    Loocv(LoocvArgs),
    /// Correlate a live frame against a reference frame.
    Aid(AidArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Vowel8,
}

#[derive(Clone, Copy, ValueEnum)]
enum DifficultyArg {
    Easy,
    Medium,
    Hard,
}

impl From<DifficultyArg> for Difficulty {
    fn from(d: DifficultyArg) -> Self {
        match d {
            DifficultyArg::Easy => Difficulty::Easy,
            DifficultyArg::Medium => Difficulty::Medium,
            DifficultyArg::Hard => Difficulty::Hard,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "vowel8")]
    preset: Preset,
    /// Gesture scripts in the text format; replaces the preset classes.
    #[arg(long)]
    scripts: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, value_enum, default_value = "medium")]
    difficulty: DifficultyArg,
    /// Noise standard deviation; defaults to the difficulty's level.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 400)]
    window: usize,
    #[arg(long, default_value_t = 1024)]
    downsample: usize,
    #[arg(long = "delta-window", default_value_t = 9)]
    delta_window: usize,
}

impl FeatureArgs {
    fn config(&self) -> FerasecConfig {
        FerasecConfig {
            window: self.window,
            downsample: self.downsample,
            delta_window: self.delta_window,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethod {
    Hmm,
}

#[derive(Args)]
struct RecipeArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long = "learning-rate", default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long = "batch-size", default_value_t = 128)]
    batch_size: usize,
}

impl RecipeArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            epochs: self.epochs,
            rounds: self.rounds,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "hmm")]
    method: TrainMethod,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifyMethod {
    Dtw,
    Hmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Manhattan,
}

impl From<MetricArg> for DtwConfig {
    fn from(m: MetricArg) -> Self {
        DtwConfig {
            local_metric: match m {
                MetricArg::Euclidean => LocalMetric::Euclidean,
                MetricArg::Manhattan => LocalMetric::Manhattan,
            },
        }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, value_enum)]
    method: ClassifyMethod,
    /// Feature matrix file, or a raw frame set to extract features from.
    #[arg(long)]
    test: PathBuf,
    /// Reference manifest (dtw).
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Trained model (hmm).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct LoocvArgs {
    /// One method, or a comma-separated list for a side-by-side comparison.
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Text table path; the key=value report goes next to it with `.kv` appended.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Train once per class-balanced fold instead of once per item.
    #[arg(long = "fast-loocv", conflicts_with = "faithful")]
    fast_loocv: bool,
    /// Force one training run per item even for large corpora.
    #[arg(long)]
    faithful: bool,
    #[arg(long, default_value_t = HmmProtocol::DEFAULT_FAST_FOLDS)]
    folds: usize,
    #[arg(long)]
    position: Option<String>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[command(flatten)]
    recipe: RecipeArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct AidArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    live: PathBuf,
    #[arg(long, default_value_t = DEFAULT_AID_THRESHOLD)]
    threshold: f64,
    /// 1-based slow-time index of the frame taken from each set.
    #[arg(long, default_value_t = 1)]
    frame: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train_cmd(a),
        Command::Classify(a) => classify(a),
        Command::Loocv(a) => loocv_cmd(a),
        Command::Aid(a) => aid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

type Result<T> = ssr_core::Result<T>;

fn generate(a: GenerateArgs) -> Result<()> {
    let difficulty = Difficulty::from(a.difficulty);
    let scripts = match &a.scripts {
        Some(path) => parse_scripts(&fs::read_to_string(path)?)?,
        None => match a.preset {
            Preset::Vowel8 => vowel8_scripts(difficulty),
        },
    };
    let mut cfg = preset_config(difficulty);
    if let Some(noise) = a.noise {
        cfg.noise_sigma = noise;
    }
    fs::create_dir_all(&a.out)?;
    let manifest = generate_corpus(&scripts, a.reps, &cfg, a.seed, &a.out)?;
    println!(
        "{} frame sets, {} classes -> {}",
        manifest.len(),
        manifest.class_count(),
        a.out.join(ssr_core::synth::MANIFEST_FILE).display()
    );
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let fs = load_frameset(&a.input)?;
    let features = extract_features(&fs, &a.features.config(), a.features.alpha)?;
    store_features(&features, &a.output)?;
    println!("6x{} features -> {}", features.len(), a.output.display());
    Ok(())
}

/// A feature file as is, or features extracted from a frame set.
fn features_of(path: &Path, args: &FeatureArgs) -> Result<FeatureMatrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(FEATURE_MAGIC) {
        load_features(path)
    } else {
        let fs = ssr_core::FrameSet::from_bytes(&bytes)?;
        extract_features(&fs, &args.config(), args.alpha)
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Features for every manifest entry, in manifest order.
fn corpus_features(manifest_path: &Path, args: &FeatureArgs) -> Result<(CorpusManifest, Vec<FeatureMatrix>)> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let features = manifest
        .entries()
        .iter()
        .map(|e| features_of(&base.join(&e.path), args))
        .collect::<Result<_>>()?;
    Ok((manifest, features))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let TrainMethod::Hmm = a.method;
    let (manifest, features) = corpus_features(&a.corpus, &a.features)?;
    let examples: Vec<Example<'_>> = manifest
        .entries()
        .iter()
        .zip(&features)
        .map(|(e, f)| Example {
            obs: f.view(),
            label: e.label.as_str(),
        })
        .collect();
    let start = Instant::now();
    let model = train(&examples, &a.recipe.config(a.seed))?;
    store_model(&model, &a.out)?;
    eprintln!("trained in {:.1?}", start.elapsed());
    println!("{} classes -> {}", model.labels().len(), a.out.display());
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let test = features_of(&a.test, &a.features)?;
    match a.method {
        ClassifyMethod::Dtw => {
            let refs = a
                .refs
                .as_ref()
                .ok_or_else(|| Error::Domain("--refs is required for dtw".into()))?;
            let (manifest, features) = corpus_features(refs, &a.features)?;
            let best = classify_1nn(
                &test,
                features.iter().zip(manifest.entries()).map(|(f, e)| (f, e.label.as_str())),
                &a.metric.into(),
            )?;
            println!("{}\t{}", best.label, best.distance);
        }
        ClassifyMethod::Hmm => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Error::Domain("--model is required for hmm".into()))?;
            let model = load_model(path)?;
            let c = model.classify(test.view())?;
            println!("{}\t{}", c.label, c.log_likelihoods[c.class_index]);
        }
    }
    Ok(())
}

fn loocv_cmd(a: LoocvArgs) -> Result<()> {
    let methods: Vec<Method> = a.method.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let manifest = CorpusManifest::load(&a.corpus)?;
    let manifest = match &a.position {
        Some(p) => manifest.at_position(p.parse::<RadarPosition>()?)?,
        None => manifest,
    };
    let items = load_corpus(&manifest, manifest_dir(&a.corpus))?;
    let fast = a.fast_loocv || (!a.faithful && items.len() > FAITHFUL_LIMIT);
    let cfg = EvalConfig {
        seed: a.seed,
        ferasec: a.features.config(),
        alpha: a.features.alpha,
        dtw: a.metric.into(),
        train: a.recipe.config(a.seed),
        protocol: if fast {
            HmmProtocol::Fast { folds: a.folds }
        } else {
            HmmProtocol::Faithful
        },
        ..EvalConfig::default()
    };
    let mut reports = Vec::new();
    let mut table = String::new();
    let mut kv = String::new();
    for method in methods {
        let start = Instant::now();
        let r = loocv(&items, method, &cfg)?;
        eprintln!(
            "{method}: {:.2}% in {:.1?} (features {:.1?}, {} training runs)",
            r.accuracy_percent,
            start.elapsed(),
            r.timing.features,
            r.timing.training_runs
        );
        table.push_str(&r.render_table());
        table.push('\n');
        kv.push_str(&r.render_kv());
        reports.push(r);
    }
    if reports.len() > 1 {
        let refs: Vec<_> = reports.iter().collect();
        table.push_str(&render_comparison(&refs));
    }
    print!("{table}");
    if let Some(path) = &a.report {
        fs::write(path, &table)?;
        let mut kv_path = path.clone().into_os_string();
        kv_path.push(".kv");
        fs::write(&kv_path, &kv)?;
    }
    Ok(())
}

fn aid(a: AidArgs) -> Result<()> {
    let reference = load_frameset(&a.reference)?;
    let live = load_frameset(&a.live)?;
    let pick = |fs: &ssr_core::FrameSet| {
        if a.frame == 0 || a.frame > fs.frames() {
            Err(Error::Domain(format!("frame {} outside 1..={}", a.frame, fs.frames())))
        } else {
            Ok(fs.frame_owned(a.frame - 1))
        }
    };
    let check = positioning_check(&pick(&reference)?, &pick(&live)?, a.threshold)?;
    println!("{:.6}\t{}", check.rho, if check.pass { "pass" } else { "adjust" });
    Ok(())
}
