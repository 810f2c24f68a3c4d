//! The `fmm-beat` command line.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::fitting::IStepConfig;

mod evaluate;
mod fit;
mod simulate;

pub use evaluate::{read_marks, MarkRow};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOTHING_FITTED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fmm-beat", version, about = "Fit, simulate and score five-wave FMM models of ECG beats")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a record around its QRS annotations and fit every beat.
    Fit(FitArgs),
    /// Write a synthetic record with annotations and ground truth.
    Simulate(SimulateArgs),
    /// Score predicted marks against reference marks.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Signal CSV, one voltage per row.
    pub signal: PathBuf,
    /// Annotation CSV with `sample,label` rows.
    pub annotations: PathBuf,
    /// Sampling frequency in Hz.
    #[arg(long)]
    pub fs: f64,
    /// `key = value` overrides of the identification thresholds.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Fit the beats as cut, without removing a linear trend.
    #[arg(long)]
    pub no_detrend: bool,
    /// Output directory.
    #[arg(long, short, default_value = "fmm-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in morphology: NORMAL, PACE, RBBB, APC or PVC.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    pub preset: Option<String>,
    /// JSON file with model parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Beats written besides one guard beat at each end.
    #[arg(long, default_value_t = 1)]
    pub beats: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampling frequency in Hz.
    #[arg(long, default_value_t = 250.0)]
    pub fs: f64,
    /// RR interval in seconds.
    #[arg(long, default_value_t = 0.8)]
    pub rr: f64,
    #[arg(long, short, default_value = "fmm-sim")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted marks CSV with `beat,label,sample` columns.
    pub predicted: PathBuf,
    /// Reference marks CSV with the same columns.
    pub reference: PathBuf,
    /// Sampling frequency in Hz.
    #[arg(long)]
    pub fs: f64,
    /// Matching tolerance in milliseconds.
    #[arg(long, default_value_t = crate::metrics::DEFAULT_TOLERANCE_MS)]
    pub tol_ms: f64,
    /// Also write the table as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    match run(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fmm-beat: {e}");
            e.code
        }
    }
}

pub fn run(cmd: Command, stdout: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Fit(a) => fit::run(&a, stdout),
        Command::Simulate(a) => simulate::run(&a, stdout),
        Command::Evaluate(a) => evaluate::run(&a, stdout),
    }
}

fn check_fs(fs: f64) -> CliResult {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--fs must be a positive number of Hz, got {fs}")))
    }
}

fn load_config(path: Option<&Path>) -> CliResult<IStepConfig> {
    let cfg = match path {
        Some(p) => IStepConfig::from_file(p)?,
        None => IStepConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(Error::Parse {
        path: dir.to_path_buf(),
        message: e.to_string(),
    }))
}

fn create_file(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(std::io::BufWriter::new(f))
}
