//! The `lapdae` command-line tool.

mod corrupt;
mod eval;
mod export;
mod run_dir;
mod train;

pub use run_dir::RunDir;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::optim::Mode;

#[derive(Debug, Parser)]
#[command(name = "lapdae", version, about = "Laplacian-pyramid denoising autoencoder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoints and loss logs into a new run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a metric report.
    Eval(EvalArgs),
    /// Write clean and per-level corrupted versions of one image.
    Corrupt(CorruptArgs),
    /// Export embeddings or first-layer kernels from a checkpoint.
    Export(ExportArgs),
}

/// Options shared by commands that resolve a run configuration.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root; falls back to LAPDAE_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Noise standard deviation on the 0-255 scale.
    #[arg(long)]
    pub sigma: Option<f32>,
    /// Pyramid depth.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Use only the first N training images.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Enable horizontal flips for MNIST as well.
    #[arg(long)]
    pub mnist_flip: bool,
    /// Run directory to create; defaults to runs/<timestamp>-<hash>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated list of recon, knn and probe.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Feature layers, e.g. `bottleneck` or `conv1..bottleneck`.
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// euclidean or cosine.
    #[arg(long)]
    pub distance: Option<String>,
    /// Restrict the probe's training split to its first N images.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Report CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input image; otherwise a test-split sample is taken from the dataset.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Test-split sample index when no image is given.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// A level, an inclusive range such as `0..4`, or `random`.
    #[arg(long, default_value = "0..4")]
    pub level: String,
    #[arg(long, default_value_t = 25.0)]
    pub sigma: f32,
    /// Pyramid depth.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// png or pgm.
    #[arg(long, default_value = "png")]
    pub format: String,
    #[arg(long, default_value = "corrupt-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// embeddings or kernels.
    #[arg(long)]
    pub what: String,
    #[arg(long, default_value = "bottleneck")]
    pub layer: String,
    /// Pool features to at most this many elements per sample.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset,
            data_dir: self.data_dir.clone(),
            seed: self.seed,
            ..Overrides::default()
        }
    }

    fn base_config(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Corrupt(a) => corrupt::run(a),
        Command::Export(a) => export::run(a),
    }
}

/// Parse arguments, run, and map failures onto exit codes.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
