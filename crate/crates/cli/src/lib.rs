//! `mpcx`: seeded, file-based pipeline for synthetic multipath extraction
//! experiments.
//!
//! Each subcommand is one stage. Stages communicate only through files in a
//! run directory, so every number in the final report can be recomputed
//! from the artifacts on disk.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod artifacts;
mod stages;

pub use artifacts::{AssociationReport, ExtractReport, ExtractionEcho, ExtractionResult, RunReport, ScenarioSidecar};

pub const LOCK_FILE: &str = ".mpcx.lock";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] mpcx_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{dir}: missing `{artifact}`; run the `{stage}` stage first")]
    MissingArtifact { dir: PathBuf, artifact: &'static str, stage: &'static str },

    #[error("run directory {0} is locked by another invocation (delete {LOCK_FILE} if it is stale)")]
    Locked(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mpcx", version, about = "Synthetic MIMO multipath extraction pipeline")]
pub struct Cli {
    /// Seed for scenario generation and measurement noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory receiving the stage's artifacts [default: ., or the run
    /// directory for `report`].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered ground-truth path list from a TOML spec.
    Scenario(ScenarioArgs),
    /// Synthesize the sounder frequency response of a path list.
    Synth(SynthArgs),
    /// Extract path estimates from a frequency response with greedy-LS.
    Extract(ExtractArgs),
    /// Associate estimates with the ground truth.
    Associate(AssociateArgs),
    /// Consolidate a run directory into a report and plot data.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 35x35 arrays, 1 GHz, 233 tones at 28 GHz.
    Full,
    /// 8x8 arrays, 1 GHz, 32 tones at 28 GHz.
    Desk,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SounderArgs {
    /// Sounder configuration file (TOML: n_tx, n_rx, bandwidth_hz, n_freq, carrier_hz).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Built-in sounder configuration.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario spec (TOML). `--seed` overrides its `seed` key.
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub sounder: SounderArgs,

    /// Path-list CSV.
    #[arg(long)]
    pub paths: PathBuf,

    /// Add complex white Gaussian noise of this power per sample.
    #[arg(long)]
    pub noise_power: Option<f64>,

    /// Angle columns hold degrees (half-wavelength arrays) instead of cycles.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub sounder: SounderArgs,

    /// Frequency-response tensor written by `synth`.
    #[arg(long)]
    pub response: PathBuf,

    /// Number of paths to extract.
    #[arg(long)]
    pub kdom: usize,

    /// Candidates detected per iteration.
    #[arg(long, default_value_t = 4)]
    pub kg: usize,

    /// Candidates committed per iteration.
    #[arg(long, default_value_t = 2)]
    pub kup: usize,

    /// Beamspace oversampling on every axis.
    #[arg(long, default_value_t = 4)]
    pub oversample: usize,

    /// Refit all amplitudes against the measurement at the end.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub final_ls: bool,

    /// SAGE refinement sweeps after extraction.
    #[arg(long, default_value_t = 0)]
    pub sage_sweeps: usize,

    /// Stop when residual power falls below this fraction of the input.
    #[arg(long, default_value_t = 1e-6)]
    pub residual_stop: f64,

    /// Parabolic sub-grid refinement of detected peaks.
    #[arg(long)]
    pub subgrid: bool,
}

#[derive(Debug, Args)]
pub struct AssociateArgs {
    #[command(flatten)]
    pub sounder: SounderArgs,

    /// Ground-truth path list.
    #[arg(long)]
    pub truth: PathBuf,

    /// Estimated path list.
    #[arg(long)]
    pub estimates: PathBuf,

    /// Cost of leaving a path unmatched (squared resolution bins).
    #[arg(long, default_value_t = 3.0)]
    pub unmatched_cost: f64,

    /// Truth angle columns hold degrees instead of cycles.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory holding the stage artifacts.
    pub run_dir: PathBuf,
}

/// Exclusive claim on a run directory, released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(dir.to_path_buf())),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Parses `args` (program name first), runs the stage and returns the
/// process exit code: 0 on success, 1 for usage errors, 2 for data errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let out_dir = match (&cli.out_dir, &cli.command) {
        (Some(d), _) => d.clone(),
        (None, Command::Report(r)) => r.run_dir.clone(),
        (None, _) => PathBuf::from("."),
    };
    if let Command::Report(r) = &cli.command {
        if !r.run_dir.is_dir() {
            return Err(CliError::MissingArtifact {
                dir: r.run_dir.clone(),
                artifact: artifacts::TRUTH,
                stage: "scenario",
            });
        }
    }
    let _lock = RunLock::acquire(&out_dir)?;
    match &cli.command {
        Command::Scenario(a) => stages::scenario(a, cli.seed, &out_dir, cli.quiet),
        Command::Synth(a) => stages::synth(a, cli.seed, &out_dir, cli.quiet),
        Command::Extract(a) => stages::extract(a, &out_dir, cli.quiet),
        Command::Associate(a) => stages::associate(a, &out_dir, cli.quiet),
        Command::Report(a) => stages::report(a, &out_dir, cli.quiet),
    }
}
