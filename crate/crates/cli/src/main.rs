//! Pipeline driver: synthesize paired data, train the restorer, run
//! inference, and evaluate detection-count restoration.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use derain_core::corruption::{self, derive_seed};
use derain_core::data::{self, AlignedPair, DatasetSplit};
use derain_core::evaluation::{self, report::emit_report, DetectorSpec};
use derain_core::networks::generator_forward;
use derain_core::training::{
    self, detect_overfit, Checkpoint, EpochMetrics, StepMetrics, TrainCallback, TrainError,
    TrainState,
};
use derain_core::RasterImage;

use config::{RunConfig, CONFIG_ENV_VAR};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "derain",
    about = "Raindrop-removal pipeline: synthetic data, conditional-GAN training, detection-count evaluation",
    after_help = format!("Config file: --config PATH, or ${CONFIG_ENV_VAR}; flags override file values, file values override built-in defaults.")
)]
struct Cli {
    /// Path to a JSON run config (fallback: $DERAIN_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override; every random choice in a run derives from it
    /// [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an aligned rain/clear dataset with box sidecars.
    Synth(SynthArgs),
    /// Train the conditional GAN on a pair directory.
    Train(TrainArgs),
    /// Run generator inference over a directory of distorted images.
    Infer(InferArgs),
    /// Evaluate a checkpoint with the detection-count metric.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of aligned pairs to synthesize [default: 260].
    #[arg(long)]
    pairs: Option<usize>,
    /// Image dimensions as WxH [default: 64x64].
    #[arg(long)]
    dims: Option<String>,
    /// Droplets per megapixel [default: 5000].
    #[arg(long)]
    density: Option<f64>,
    /// Output directory for the dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of aligned pairs (suffix naming scheme).
    #[arg(long)]
    data: PathBuf,
    /// Directory for checkpoints, metrics.jsonl, and best.json.
    #[arg(long)]
    out: PathBuf,
    /// Epoch count override [default: 34].
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size override [default: 1].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Resume from a checkpoint archive.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Checkpoint archive to load the generator from.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of distorted images.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for predicted images.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint archive to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory of aligned pairs to evaluate on.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for report.json and ratios.png.
    #[arg(long)]
    out: PathBuf,
    /// Detector kind override [default: oracle].
    #[arg(long)]
    detector: Option<String>,
    /// Detector parameter as key=value (repeatable).
    #[arg(long = "detector-param", value_name = "KEY=VALUE")]
    detector_params: Vec<String>,
    /// Evaluate every pair in the directory instead of the config's
    /// test split.
    #[arg(long)]
    all: bool,
    /// Proceed despite a config-fingerprint mismatch between the
    /// checkpoint and the dataset.
    #[arg(long)]
    force: bool,
}

/// Error wrapper carrying the process exit code.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_DATA,
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match e {
            TrainError::NonFiniteLoss { .. } => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }
}

macro_rules! from_data_error {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::data(e.to_string())
            }
        }
    )*};
}

from_data_error!(
    derain_core::data::DataError,
    derain_core::corruption::scene::SceneError,
    derain_core::evaluation::EvalError,
    derain_core::networks::NetworkError,
    derain_core::raster::RasterError,
);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref()).map_err(CliError::usage)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Synth(args) => cmd_synth(config, args),
        Command::Train(args) => cmd_train(config, args),
        Command::Infer(args) => cmd_infer(config, args),
        Command::Eval(args) => cmd_eval(config, args),
    }
}

fn parse_dims(raw: &str) -> Result<(u32, u32), CliError> {
    let (w, h) = raw
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::usage(format!("bad --dims {raw:?}, expected WxH")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| CliError::usage(format!("bad --dims {raw:?}, expected WxH")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn cmd_synth(mut config: RunConfig, args: SynthArgs) -> Result<(), CliError> {
    if let Some(raw) = &args.dims {
        let (w, h) = parse_dims(raw)?;
        config.dims = config::Dims(w, h);
    }
    if let Some(density) = args.density {
        config.corruption.density = density;
    }
    let n_pairs = args.pairs.unwrap_or(260);
    let fingerprint = config.fingerprint();

    let items = corruption::synthesize_dataset(
        n_pairs,
        (config.dims.0, config.dims.1),
        config.corruption.density,
        config.seed,
    )?;
    let manifest = data::write_pair_dataset(&items, &args.out, Some(fingerprint))?;
    println!(
        "synthesized {} pairs at {}x{} (density {}) -> {}",
        items.len(),
        config.dims.0,
        config.dims.1,
        config.corruption.density,
        manifest.display()
    );
    Ok(())
}

fn load_split(config: &RunConfig, dir: &Path) -> Result<DatasetSplit, CliError> {
    let pairs = data::load_pair_directory(dir, &config.naming_scheme.0)?;
    let counts = config.split_counts(pairs.len());
    let split_seed = derive_seed(config.seed, 0x73706c6974); // split domain
    Ok(data::split_dataset(pairs, counts, split_seed)?)
}

struct EpochPrinter;

impl TrainCallback for EpochPrinter {
    fn on_epoch(&mut self, m: &EpochMetrics) {
        println!(
            "epoch {:3}: d_loss {:.4}  g_adv {:.4}  train_l1 {:.4}  val_l1 {:.4}",
            m.epoch, m.d_loss, m.g_adv, m.train_l1, m.val_l1
        );
    }
    fn on_step(&mut self, _epoch: usize, _step: usize, _metrics: &StepMetrics) {}
}

fn cmd_train(mut config: RunConfig, args: TrainArgs) -> Result<(), CliError> {
    if let Some(epochs) = args.epochs {
        config.train.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.train.batch_size = batch;
    }
    let fingerprint = config.fingerprint();
    let split = load_split(&config, &args.data)?;
    if split.train.is_empty() {
        return Err(CliError::data(format!(
            "no training pairs found under {}",
            args.data.display()
        )));
    }
    let dims = split.train[0].distorted.dims();

    let mut state = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let mut state = TrainState::from_checkpoint(&ckpt)?;
            // Flag overrides extend or shorten the schedule on resume.
            state.config.epochs = config.train.epochs;
            println!("resumed from {} at epoch {}", path.display(), state.epoch);
            state
        }
        None => {
            let mut state = TrainState::new(
                &config.generator_config(dims),
                &config.discriminator_config(),
                &config.train_config(),
            )?;
            state.fingerprint = Some(fingerprint.clone());
            state
        }
    };

    training::train_epochs(&mut state, &split, &mut EpochPrinter, Some(&args.out))?;

    let metrics_path = args.out.join("metrics.jsonl");
    let mut metrics_file = std::fs::File::create(&metrics_path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", metrics_path.display())))?;
    training::write_metrics_jsonl(
        &mut metrics_file,
        &state.config,
        state.fingerprint.as_deref(),
        &state.history,
    )
    .map_err(|e| CliError::data(format!("cannot write metrics: {e}")))?;

    let report = detect_overfit(&state.history, config.train.overfit_patience);
    let best_path = args
        .out
        .join(format!("ckpt_ep{:03}.dkpt", report.best_epoch + 1));
    let best_doc = serde_json::json!({
        "best_epoch": report.best_epoch,
        "overfit_at": report.overfit_at,
        "checkpoint": best_path.display().to_string(),
        "config_fingerprint": state.fingerprint,
    });
    let best_json = args.out.join("best.json");
    std::fs::write(&best_json, serde_json::to_string_pretty(&best_doc).expect("json"))
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", best_json.display())))?;
    match report.overfit_at {
        Some(epoch) => println!(
            "best epoch {} (validation L1 minimum); overfit onset flagged at epoch {epoch}",
            report.best_epoch
        ),
        None => println!(
            "best epoch {} (validation L1 minimum); no overfit onset flagged",
            report.best_epoch
        ),
    }
    Ok(())
}

fn infer_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");
    stem.strip_suffix("_rain").unwrap_or(stem).to_string()
}

fn cmd_infer(_config: RunConfig, args: InferArgs) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;

    let mut entries: Vec<PathBuf> = std::fs::read_dir(&args.input)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.input.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .map(|x| ["png", "jpg", "jpeg", "bmp"].contains(&x.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .filter(|p| {
            // Skip clear counterparts when pointed at a pair directory.
            !p.file_stem()
                .and_then(|s| s.to_str())
                .map(|s| s.ends_with("_clear") || s.ends_with("_pred"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();

    if entries.is_empty() {
        println!(
            "warning: no input images found under {}",
            args.input.display()
        );
        return Ok(());
    }

    let mut failures = 0usize;
    for path in &entries {
        let result = RasterImage::load(path)
            .map_err(|e| e.to_string())
            .and_then(|img| generator_forward(&ckpt.generator, &img).map_err(|e| e.to_string()));
        match result {
            Ok(pred) => {
                let out_path = args.out.join(format!("{}_pred.png", infer_id(path)));
                pred.save_png(&out_path)?;
            }
            Err(msg) => {
                eprintln!("skipping {}: {msg}", path.display());
                failures += 1;
            }
        }
    }
    println!(
        "inferred {} images ({} skipped)",
        entries.len() - failures,
        failures
    );
    if failures > 0 {
        return Err(CliError::data(format!("{failures} images failed inference")));
    }
    Ok(())
}

fn cmd_eval(mut config: RunConfig, args: EvalArgs) -> Result<(), CliError> {
    if let Some(kind) = args.detector {
        config.detector.kind = kind;
    }
    for raw in &args.detector_params {
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("bad --detector-param {raw:?}")))?;
        config
            .detector
            .parameters
            .insert(k.to_string(), v.to_string());
    }
    let spec: DetectorSpec = config.detector_spec();
    let ckpt = Checkpoint::load(&args.checkpoint)?;

    // Fingerprint hygiene: a checkpoint trained under one config must
    // not silently evaluate against data from another.
    let manifest_path = args.data.join("pairs_manifest.json");
    if manifest_path.exists() {
        let manifest = data::read_pair_manifest(&manifest_path)?;
        if let (Some(data_fp), Some(ckpt_fp)) = (manifest.fingerprint(), ckpt.fingerprint.as_deref())
        {
            if data_fp != ckpt_fp && !args.force {
                return Err(CliError::data(format!(
                    "config fingerprint mismatch: dataset {} vs checkpoint {} (use --force to override)",
                    &data_fp[..12.min(data_fp.len())],
                    &ckpt_fp[..12.min(ckpt_fp.len())]
                )));
            }
        }
    }

    let test_pairs: Vec<AlignedPair> = if args.all {
        data::load_pair_directory(&args.data, &config.naming_scheme.0)?
    } else {
        load_split(&config, &args.data)?.test
    };
    if test_pairs.is_empty() {
        return Err(CliError::data("no test pairs to evaluate"));
    }

    let outcome = evaluation::evaluate_model(&ckpt, &test_pairs, &spec)?;
    let files = emit_report(&outcome, &spec, ckpt.fingerprint.as_deref(), &args.out)?;
    println!(
        "term1 {:.4}  term2 {:.4}  m_effective {}  skipped {}",
        outcome.scores.term1,
        outcome.scores.term2,
        outcome.scores.m_effective,
        outcome.scores.skipped
    );
    println!(
        "mean L1: predicted {:.4}, input {:.4}",
        outcome.mean_l1_predicted, outcome.mean_l1_input
    );
    println!(
        "report: {} and {}",
        files.report_json.display(),
        files.ratios_png.display()
    );
    Ok(())
}
