//! `logseg`: segment, generate, evaluate and compare log point clouds.
//!
//! Exit status is 0 on success, 1 on data errors and 2 on usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use logseg::baseline::ClusterStrategy;
use logseg::io::Format;
use logseg::loss::LossWeights;

#[derive(Debug, Parser)]
#[command(name = "logseg", version, about = "Unsupervised segmentation of log point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment one cloud and write the labelled cloud, centreline,
    /// normalisation record and loss history.
    Segment(SegmentArgs),
    /// Generate a labelled synthetic cloud, or the default suite.
    Synth(SynthArgs),
    /// Score a predicted mask against ground truth, or segment and score a
    /// directory of labelled clouds.
    Eval(EvalArgs),
    /// Run all 8 on/off combinations of the optional loss terms on a suite.
    Ablate(AblateArgs),
    /// Run the slice + DBSCAN + circle baseline on one cloud.
    Baseline(BaselineArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

/// Settings shared by every command that runs the optimiser.
#[derive(Debug, Args, Clone, Default)]
struct RunOptions {
    /// JSON configuration; explicit flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loss coefficients as `fit,rho,sigma,plane,normal,weights`.
    #[arg(long, value_parser = parse_loss_weights)]
    loss_weights: Option<LossWeights>,
    /// Degree of the centreline polynomial.
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=3))]
    degree: Option<u64>,
    /// Neighbourhood size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight above which a point counts as an inlier.
    #[arg(long, value_parser = parse_open_unit)]
    threshold: Option<f64>,
    /// Maximum number of optimiser steps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
    /// Adam learning rate.
    #[arg(long, value_parser = parse_positive)]
    lr: Option<f64>,
    /// Skip the PCA alignment before normalisation.
    #[arg(long)]
    no_pca_align: bool,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<Format>,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["spec", "default_suite"]))]
struct SynthArgs {
    /// JSON spec of the log to generate.
    spec: Option<PathBuf>,
    /// Write the 20-cloud default suite into the `--out` directory.
    #[arg(long)]
    default_suite: bool,
    /// Output file, or directory with `--default-suite`.
    #[arg(long)]
    out: PathBuf,
    /// Cloud format for `--default-suite`.
    #[arg(long, default_value = "ply")]
    format: Format,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["pred", "suite"]))]
struct EvalArgs {
    /// Cloud whose label column is the predicted mask.
    #[arg(requires = "gt")]
    pred: Option<PathBuf>,
    /// Cloud with ground-truth labels.
    gt: Option<PathBuf>,
    /// Directory of labelled clouds to segment and score.
    #[arg(long, conflicts_with_all = ["pred", "gt"])]
    suite: Option<PathBuf>,
    /// Report file; `.json` gives JSON, anything else CSV. Defaults to CSV
    /// on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pool confusion counts instead of averaging per-cloud ratios.
    #[arg(long)]
    micro: bool,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    suite: PathBuf,
    /// Per-cloud CSV; a JSON summary is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    micro: bool,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_positive)]
    eps: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    min_pts: Option<u64>,
    #[arg(long, value_parser = parse_positive)]
    slice_width: Option<f64>,
    #[arg(long, value_parser = parse_non_negative)]
    dist_threshold: Option<f64>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<ClusterStrategy>,
    #[arg(long)]
    no_pca_align: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(3..))]
    n: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 1e-5, value_parser = parse_positive)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(0..=3))]
    degree: u64,
    #[arg(long, default_value_t = 1e-4, value_parser = parse_positive)]
    tolerance: f64,
}

fn parse_loss_weights(s: &str) -> Result<LossWeights, String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 6] = values.try_into().map_err(|v: Vec<f64>| format!("expected 6 values, got {}", v.len()))?;
    LossWeights::from_array(arr).map_err(|e| e.to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match parse_f64(s)? {
        v if v > 0.0 && v.is_finite() => Ok(v),
        v => Err(format!("{v} must be positive")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match parse_f64(s)? {
        v if v >= 0.0 && v.is_finite() => Ok(v),
        v => Err(format!("{v} must be non-negative")),
    }
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    match parse_f64(s)? {
        v if v > 0.0 && v < 1.0 => Ok(v),
        v => Err(format!("{v} must lie strictly between 0 and 1")),
    }
}

fn parse_strategy(s: &str) -> Result<ClusterStrategy, String> {
    match s {
        "largest" => Ok(ClusterStrategy::Largest),
        "highest-core-density" => Ok(ClusterStrategy::HighestCoreDensity),
        _ => Err(format!("unknown strategy `{s}` (largest | highest-core-density)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Synth(a) => commands::synth(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
