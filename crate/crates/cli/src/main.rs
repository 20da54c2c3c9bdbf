use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{parse_f64_list, parse_usize_list, F64List, UsizeList};

/// Sparse twoblock PLS: fit, predict, cross-validate, simulate and compare.
#[derive(Debug, Parser)]
#[command(name = "twoblock", version)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator and write its archive, selection and summary.
    Fit(FitArgs),
    /// Apply a saved model to new predictor data.
    Predict(PredictArgs),
    /// Grid-search cross-validation followed by a refit at the best point.
    Cv(CvArgs),
    /// Monte-Carlo comparison of estimators on simulated data.
    Simulate(SimulateArgs),
    /// Cross-validate all four methods on a training set and score them on a test set.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Predictor CSV.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response CSV.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// center or autoscale.
    #[arg(long)]
    pub scaling: Option<String>,
    /// TOML file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct EstimatorArgs {
    /// pls1, pls2, xypls or sparse-twoblock.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
    /// PLS1 only: one component count per response, e.g. 7,6,6,7.
    #[arg(long, value_parser = parse_usize_list)]
    pub h_per_response: Option<UsizeList>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct GridArgs {
    #[arg(long)]
    pub folds: Option<usize>,
    /// Keep rows in file order when forming folds.
    #[arg(long)]
    pub no_shuffle: bool,
    /// mean-mse or standardized-mean-mse.
    #[arg(long)]
    pub cv_score: Option<String>,
    #[arg(long, value_parser = parse_usize_list)]
    pub g_grid: Option<UsizeList>,
    #[arg(long, value_parser = parse_usize_list)]
    pub h_grid: Option<UsizeList>,
    #[arg(long, value_parser = parse_f64_list)]
    pub eta_grid: Option<F64List>,
    #[arg(long, value_parser = parse_f64_list)]
    pub kappa_grid: Option<F64List>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model archive written by fit or cv.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    /// pls1, pls2, xypls or sparse-twoblock.
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: Option<usize>,
    /// Informative predictor counts, one scenario each.
    #[arg(long, value_parser = parse_usize_list)]
    pub p1_grid: Option<UsizeList>,
    #[arg(long)]
    pub p2: Option<usize>,
    #[arg(long)]
    pub q1: Option<usize>,
    #[arg(long)]
    pub q2: Option<usize>,
    #[arg(long)]
    pub h_true: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Estimator spec such as `sparse-twoblock:g=1,h=3,eta=0.5,kappa=0.5`
    /// or `pls2:h=3`; repeatable.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub test_x: Option<PathBuf>,
    #[arg(long)]
    pub test_y: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
