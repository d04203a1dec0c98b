//! Command-line front end.
//!
//! Every subcommand accepts `--seed`, `--reps`, `--out`, `--format`,
//! `--config` and `--threads`. Without `--out` the main table goes to stdout;
//! with it, files and a `manifest.json` are written to that directory.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 I/O error.

mod commands;
pub mod config;
pub mod manifest;
pub mod svg;
pub mod table;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use verify::{CheckOutcome, Level, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    /// Verification ran and at least one check failed.
    Failed(String),
}

impl CliError {
    pub fn io(e: impl std::fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "overprior", version, about = "Bayes factors and survey estimators under independence priors")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Root seed for all random draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of simulated replicates.
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    /// Output directory; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Table format; defaults to csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML experiment file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for replicate loops.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log Bayes factor of the equal-means submodel, from data or simulation.
    OnewayBf(OnewayBfArgs),
    /// Exact median of log F over a range of k, as CSV and SVG.
    MedianCurve(MedianCurveArgs),
    /// Limiting slope of log F / k and the critical effect spread.
    OnewayAsymptotics(AsymptoticsArgs),
    /// Survey estimates of the finite-population mean.
    SurveyEstimate(SurveyArgs),
    /// Compare closed forms against quadrature and Monte Carlo references.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct OnewayBfArgs {
    /// CSV with columns `group,value`, one observation per line.
    #[arg(long, conflicts_with = "simulate")]
    pub input: Option<PathBuf>,
    /// Simulate data instead of reading `--input`.
    #[arg(long)]
    pub simulate: bool,
    /// Observations per group.
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of groups.
    #[arg(long)]
    pub k: Option<u32>,
    /// Prior standard deviation of the group means.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Standard deviation of the true group means.
    #[arg(long, conflicts_with = "mu")]
    pub epsilon: Option<f64>,
    /// Fixed true group means, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    /// Prior probability of the submodel.
    #[arg(long)]
    pub pi2: Option<f64>,
    /// Draw the group means once and reuse them for every replicate.
    #[arg(long)]
    pub freeze_mu: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MedianCurveArgs {
    /// Observations per group.
    #[arg(long)]
    pub n: Option<u32>,
    /// Prior standard deviation of the group means.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Standard deviation of the true group means.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Smallest number of groups.
    #[arg(long)]
    pub k_min: Option<u32>,
    /// Largest number of groups.
    #[arg(long)]
    pub k_max: Option<u32>,
    /// SVG path; defaults to `median_curve.svg` under `--out`.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// CSV path; defaults to `median_curve.csv` under `--out`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AsymptoticsArgs {
    /// Observations per group.
    #[arg(long)]
    pub n: Option<u32>,
    /// Prior standard deviation of the group means.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Standard deviation of the true group means.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SurveyArgs {
    /// JSON survey record.
    #[arg(long, conflicts_with = "simulate")]
    pub input: Option<PathBuf>,
    /// Simulate a population and sample instead of reading `--input`.
    #[arg(long)]
    pub simulate: bool,
    /// Population size B.
    #[arg(long)]
    pub population: Option<usize>,
    /// Sample size |J|.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Mean of the unit-level Beta distribution.
    #[arg(long)]
    pub psi: Option<f64>,
    /// Variance of the unit-level Beta distribution.
    #[arg(long)]
    pub eta: Option<f64>,
    /// First shape of the Beta prior on ψ.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Second shape of the Beta prior on ψ.
    #[arg(long)]
    pub beta0: Option<f64>,
    /// Use the improper limit of the prior on ψ.
    #[arg(long)]
    pub improper: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Which module to check.
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Instance counts and Monte Carlo sizes.
    #[arg(long, value_enum, default_value_t = Level::Quick)]
    pub level: Level,
}

/// Parses arguments and runs one command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command_line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli, command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
