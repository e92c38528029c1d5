mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mislabel::{Error, ErrorKind};

/// Detect mislabeled training examples and benchmark detectors through
/// detection, filtering and retraining.
#[derive(Debug, Parser)]
#[command(name = "mislabel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(DataCmd),
    /// Corrupt the labels of a dataset.
    Corrupt(DataCmd),
    /// Score every training example with one detector.
    Detect(DetectCmd),
    /// Measure calibration error before and after isotonic and sigmoid calibration.
    CalibrateEval(CalibrateCmd),
    /// Run the detection, filtering and training pipeline once.
    Pipeline(PipelineCmd),
    /// Run a full benchmark sweep from a JSON config.
    Bench(BenchCmd),
    /// Redraw the SVG plots of a finished bench from its CSV tables.
    Report(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config; a manifest written by a previous run is accepted too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MISLABEL_OUT_DIR", default_value = "mislabel-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Synthetic generator: `two-moons` or `blobs`.
    #[arg(long, conflicts_with = "data")]
    pub synth: Option<String>,
    /// CSV dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Column holding ground-truth labels, if the CSV has one.
    #[arg(long)]
    pub truth_column: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub text_columns: Vec<String>,
    /// Number of synthetic examples.
    #[arg(long)]
    pub n: Option<usize>,
    /// `none`, `uniform:<rate>`, `per_class:<r0>,<r1>,..` or `flip:<count>`.
    #[arg(long)]
    pub noise: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CalArgs {
    /// Calibration examples; 0 disables the calibration set.
    #[arg(long)]
    pub cal_size: Option<usize>,
    /// Corrupt the calibration labels like the training labels.
    #[arg(long)]
    pub cal_noisy: Option<bool>,
    /// CSV calibration set (detect only).
    #[arg(long)]
    pub cal_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct DetectCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cal: CalArgs,
    /// aum, cleanlab, consensus or small-loss.
    #[arg(long)]
    pub detector: Option<String>,
    /// baseline, adjust, isotonic or sigmoid.
    #[arg(long)]
    pub addon: Option<String>,
}

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cal: CalArgs,
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cal: CalArgs,
    #[arg(long)]
    pub detector: Option<String>,
    #[arg(long)]
    pub addon: Option<String>,
    /// Filtering quantiles; the one with the lowest validation loss is kept.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[command(flatten)]
    pub common: Common,
    /// Restrict to these detectors.
    #[arg(long, value_delimiter = ',')]
    pub detector: Vec<String>,
    /// Restrict to these addons.
    #[arg(long, value_delimiter = ',')]
    pub addon: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
    /// Calibration-set sizes to sweep.
    #[arg(long, value_delimiter = ',')]
    pub cal_size: Vec<usize>,
    #[arg(long)]
    pub cal_noisy: Option<bool>,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Internal => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = match &cli.command {
        Command::Synth(c) | Command::Corrupt(c) => &c.common,
        Command::Detect(c) => &c.common,
        Command::CalibrateEval(c) => &c.common,
        Command::Pipeline(c) => &c.common,
        Command::Bench(c) => &c.common,
        Command::Report(c) => c,
    };
    if let Some(n) = common.parallelism {
        if n == 0 {
            return Err(Error::config("parallelism must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(c) => commands::synth(&c),
        Command::Corrupt(c) => commands::corrupt(&c),
        Command::Detect(c) => commands::detect(&c),
        Command::CalibrateEval(c) => commands::calibrate_eval(&c),
        Command::Pipeline(c) => commands::pipeline(&c),
        Command::Bench(c) => commands::bench(&c),
        Command::Report(c) => commands::report(&c),
    }
}
