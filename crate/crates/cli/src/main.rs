//! `mmsynth`: preprocess, train, synth, eval-metrics, eval-dice, report.

mod commands;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmsynth::preprocess::{FoldRole, GeometryMode, NormalizationMode};
use mmsynth::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmsynth", version, about = "Missing-modality MRI synthesis pipeline")]
struct Cli {
    /// Flat TOML file with settings for the chosen subcommand; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a BraTS-layout dataset and write seeded, compressed shards.
    Preprocess(PreprocessArgs),
    /// Train the generator and discriminator on the training shards.
    Train(TrainArgs),
    /// Synthesize every requested scenario for a fold and export NIfTI volumes.
    Synth(SynthArgs),
    /// MSE, PSNR and SSIM of a synthesis sweep per scenario.
    EvalMetrics(EvalMetricsArgs),
    /// ET/TC/WT Dice of backend segmentations of a synthesis sweep.
    EvalDice(EvalDiceArgs),
    /// Comparison tables, difference series and plots.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset root with one directory per patient.
    #[arg(long)]
    pub root: PathBuf,
    /// Output directory for shards and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of shards [default: 5].
    #[arg(long)]
    pub shards: Option<usize>,
    /// Global seed [default: 0].
    #[arg(long, env = "MMSYNTH_SEED")]
    pub seed: Option<u64>,
    /// Canvas geometry: padding or crop [default: padding].
    #[arg(long, value_parser = settings::parse_serde::<GeometryMode>)]
    pub mode: Option<GeometryMode>,
    /// per-modality or pooled [default: per-modality].
    #[arg(long, value_parser = settings::parse_serde::<NormalizationMode>)]
    pub normalization: Option<NormalizationMode>,
    /// Keep only slices inside the brain box's axial extent.
    #[arg(long)]
    pub skip_empty_slices: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// manifest.json written by `preprocess`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for checkpoints and train_log.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, env = "MMSYNTH_SEED")]
    pub seed: Option<u64>,
    /// Number of epochs; overrides the config file.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Batch size; overrides the config file.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Scalar type of the networks: f32 or f64 [default: f32].
    #[arg(long, value_parser = settings::parse_serde::<settings::Precision>)]
    pub precision: Option<settings::Precision>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Trainer checkpoint (e.g. final.mmck).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Manifest to read patients from [default: the one recorded in the checkpoint].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Fold role to synthesize: train, val or test [default: test].
    #[arg(long, value_parser = settings::parse_serde::<FoldRole>)]
    pub fold: Option<FoldRole>,
    /// `all`, `all+full` or comma-separated scenario strings [default: all].
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Output directory for volumes and synth_index.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalMetricsArgs {
    /// Directory written by `synth`.
    #[arg(long)]
    pub synth: PathBuf,
    /// per-slice or per-volume [default: per-slice].
    #[arg(long, value_parser = settings::parse_serde::<mmsynth::eval::Aggregation>)]
    pub aggregation: Option<mmsynth::eval::Aggregation>,
    /// Output directory for metrics.csv and metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDiceArgs {
    /// Directory written by `synth`.
    #[arg(long)]
    pub synth: PathBuf,
    /// Directory of backend label maps named `<patient>__<scenario>_seg.nii.gz`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Method tag written to every row [default: mmDM].
    #[arg(long)]
    pub method: Option<String>,
    /// Scenarios to score [default: all+full].
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Output directory for dice.csv and dice.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Our metrics CSV, or published:ours / published:org.
    #[arg(long, requires = "baseline")]
    pub metrics: Option<String>,
    /// Baseline metrics CSV, or published:org / published:ours.
    #[arg(long, requires = "metrics")]
    pub baseline: Option<String>,
    /// Dice CSV (repeatable), or published:acn / published:mmdm.
    #[arg(long)]
    pub dice: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    init_logging();
    let result = match &cli.command {
        Command::Preprocess(a) => commands::preprocess(cli.config.as_deref(), a),
        Command::Train(a) => commands::train(cli.config.as_deref(), a),
        Command::Synth(a) => commands::synth(cli.config.as_deref(), a),
        Command::EvalMetrics(a) => commands::eval_metrics(cli.config.as_deref(), a),
        Command::EvalDice(a) => commands::eval_dice(cli.config.as_deref(), a),
        Command::Report(a) => commands::report(cli.config.as_deref(), a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_INTERNAL })
        }
    }
}

pub type CliResult<T = ()> = Result<T, Error>;
