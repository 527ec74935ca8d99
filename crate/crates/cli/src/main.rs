//! `kronshrink` command-line driver.
//!
//! Every command takes an optional JSON config (`--config`); flags override
//! its fields. Each output directory gets a `manifest.json` whose `config`
//! member is the fully resolved configuration, so `--config manifest.json`
//! reruns the command exactly.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Failure;

#[derive(Debug, Parser)]
#[command(name = "kronshrink", version, about = "Robust Kronecker PCA covariance estimation")]
struct Cli {
    /// Run seed. Falls back to the config file, then KRONSHRINK_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a truth covariance, its corruption and optional sample sets.
    Synth(SynthArgs),
    /// Fit a robust Kronecker PCA estimate.
    Estimate(EstimateArgs),
    /// Monte Carlo comparison of estimators over a sample-size grid.
    Benchmark(BenchmarkArgs),
    /// KronPCA and PCA spectra of a covariance.
    Spectra(SpectraArgs),
    /// Normal QQ data for the off-diagonal entries of a covariance.
    Qq(QqArgs),
    /// Incoherence of the low-rank and sparse model spaces.
    Incoherence(IncoherenceArgs),
    /// Stability of the leading temporal factor under spatial subsampling.
    Bootstrap(BootstrapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthPreset {
    /// p_t=10, p_s=50, three AR terms, no corruption.
    PaperFig1,
    /// p_t=6, p_s=12, two AR terms with diagonal loading and sparse sites.
    Desk,
    /// As `desk` with the sparse sites replicated along temporal diagonals.
    DeskToeplitz,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BenchmarkPreset {
    /// Desk truth; SCM, Kronecker and robust fits at n = 100, 1000, 10000, 20 replicates.
    DeskFig4,
    /// Block-Toeplitz desk truth; adds the Toeplitz robust fit.
    DeskToeplitz,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<SynthPreset>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sample-set sizes to draw from the corrupted covariance.
    #[arg(long, value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Covariance CSV (with sidecar descriptor).
    #[arg(long, conflicts_with = "samples")]
    pub covariance: Option<PathBuf>,
    /// Sample-set CSV (with sidecar descriptor); required for --lambda-cv.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the block-Toeplitz estimator.
    #[arg(long)]
    pub toeplitz: bool,
    /// Plug-in theoretical regularization.
    #[arg(long, conflicts_with = "lambda_cv")]
    pub lambda_theory: bool,
    /// Cross-validated regularization.
    #[arg(long)]
    pub lambda_cv: bool,
    /// Fixed `λ_Θ`; `inf` disables the low-rank part.
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_theta: Option<f64>,
    /// Fixed `λ_Γ`; `inf` disables the sparse part.
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_gamma: Option<f64>,
    /// Sample count behind --covariance, for --lambda-theory.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Multiplier on the theoretical `λ_Θ`.
    #[arg(long)]
    pub theta_scale: Option<f64>,
    /// Multiplier on the theoretical `λ_Γ`.
    #[arg(long)]
    pub gamma_scale: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<BenchmarkPreset>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Comma list of `kind[:theta_scale[:gamma_scale]]`, e.g. `scm,kron:0.015,robust:0.015:0.065`.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    /// Prediction horizon in frames; 0 skips the prediction loss.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Worker threads (does not affect results).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub covariance: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QqArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub covariance: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IncoherenceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Estimate directory; supplies theta, gamma and both weights.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_theta: Option<f64>,
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_gamma: Option<f64>,
    /// Separation rank; defaults to the numerical rank of theta.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Sparse support size; defaults to the nonzero count of gamma.
    #[arg(long)]
    pub support: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Spatial subset fractions, one output row each.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_theta: Option<f64>,
    #[arg(long, value_parser = parse_lambda)]
    pub lambda_gamma: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    let v = match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|e| format!("{s}: {e}"))?,
    };
    if v.is_nan() || v < 0.0 {
        return Err(format!("{s}: must be nonnegative"));
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => commands::synth(a, seed),
        Command::Estimate(a) => commands::estimate(a, seed),
        Command::Benchmark(a) => commands::benchmark(a, seed),
        Command::Spectra(a) => commands::spectra(a, seed),
        Command::Qq(a) => commands::qq(a, seed),
        Command::Incoherence(a) => commands::incoherence(a, seed),
        Command::Bootstrap(a) => commands::bootstrap(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kronshrink: {f}");
            ExitCode::from(f.code())
        }
    }
}
