//! Batch front door for the estimators.
//!
//! Subcommands: `estimate` (fit a y,z file), `simulate` (draw a scenario),
//! `benchmark` (risk curves, MISE-vs-n, rate slopes), `calibrate` (penalty
//! constant sweep). Every run writes a manifest with all defaults
//! materialized; re-running the recorded arguments with the same seed
//! reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 usage/input error, 3 numeric failure,
//! 4 threshold failure in `benchmark --gate`.

// NaN-rejecting guards, same idiom as the library.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "eivreg", version, about = "Errors-in-variables regression estimators")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit the regression estimate to a CSV file with header y,z.
    Estimate(EstimateArgs),
    /// Draw a synthetic dataset from a scenario file.
    Simulate(SimulateArgs),
    /// Monte Carlo risk benchmark over a list of sample sizes.
    Benchmark(BenchmarkArgs),
    /// Sweep the penalty constants and report MISE per value.
    Calibrate(CalibrateArgs),
}

/// Estimator tuning shared by the subcommands. Defaults mirror the library;
/// the manifest records every materialized value.
#[derive(Args, Clone)]
pub struct EstimatorFlags {
    /// Density penalty constant.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Numerator penalty constant.
    #[arg(long)]
    pub kappa_prime: Option<f64>,
    /// Fixed coefficient truncation (overrides the sample-size rule).
    #[arg(long)]
    pub kn: Option<usize>,
    /// Cap on the sample-size truncation rule.
    #[arg(long, conflicts_with = "kn")]
    pub kn_cap: Option<usize>,
    /// Trim exponent k; the ratio is clamped at n^k.
    #[arg(long)]
    pub trim_exponent: Option<f64>,
    /// Spacing of the candidate model dimensions.
    #[arg(long)]
    pub dim_step: Option<f64>,
    /// Evaluation grid as lo:hi:points.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Frequency-domain quadrature nodes (power of two).
    #[arg(long)]
    pub quad_nodes: Option<usize>,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Input CSV with header y,z.
    #[arg(long)]
    pub input: PathBuf,
    /// Noise kind: gaussian | laplace | cauchy | none.
    #[arg(long)]
    pub noise: String,
    /// Noise level sigma.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: EstimatorFlags,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated sample sizes, e.g. 500,2000,8000.
    #[arg(long)]
    pub n_list: String,
    /// Replications per sample size.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Fail (exit 4) when adaptive risk is not decreasing in n or a fitted
    /// slope is nonnegative.
    #[arg(long)]
    pub gate: bool,
    #[command(flatten)]
    pub flags: EstimatorFlags,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated penalty constants to sweep.
    #[arg(long)]
    pub kappa_grid: String,
    /// Replications per grid point.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: EstimatorFlags,
}

/// Failure with its process exit code.
pub enum CliError {
    Usage(String),
    Numeric(String),
    Gate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Gate(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Gate(m) => m,
        }
    }
}

impl From<eivreg::Error> for CliError {
    fn from(e: eivreg::Error) -> Self {
        use eivreg::Error::*;
        match e {
            InvalidParameter(_) | EmptyInput(_) | MissingResponses | Parse { .. } | Json(_)
            | Io(_) | UnsupportedScenario(_) | InsufficientPoints { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => commands::estimate(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Benchmark(args) => commands::benchmark(&args),
        Command::Calibrate(args) => commands::calibrate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
