use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

/// Explain edge-weight-aware GNN node classifiers.
#[derive(Debug, Parser, Serialize)]
#[command(name = "wgexplain", version)]
struct Cli {
    /// Run directory for every artifact. Defaults to `<root>/<command>`,
    /// where the root comes from WGEXPLAIN_OUT or is `runs`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-node fan-out (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Generate or import a dataset bundle.
    Gen(GenArgs),
    /// Train a classifier on a bundle.
    Train(TrainArgs),
    /// Explain one or more nodes.
    Explain(ExplainArgs),
    /// Class statistics plus ground-truth scores where available.
    Metrics(MetricsArgs),
    /// Distance and similarity maps over sampled nodes.
    Disentangle(DisentangleArgs),
    /// Render a saved edge explanation as DOT.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Dataset {
    Syncomp,
    Synnode,
    Bitcoin,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    dataset: Dataset,
    /// SynComp attachment weight.
    #[arg(long, default_value_t = 0.1)]
    w: f64,
    /// SynComp noise-edge weight.
    #[arg(long, default_value_t = 0.1)]
    noise_weight: f64,
    /// Rating CSV (`rater,ratee,score,time`) for the bitcoin dataset.
    #[arg(long, required_if_eq("dataset", "bitcoin"))]
    input: Option<PathBuf>,
    /// Keep only ratings at or before this timestamp.
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum EdgeMethodArg {
    Mmi,
    Ggd,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FeatureArg {
    Mmi,
    Pda,
    Ggd,
    All,
    None,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SelectionArgs {
    /// Keep the k best arcs.
    #[arg(long, conflicts_with = "threshold", value_parser = clap::value_parser!(u64).range(1..))]
    topk: Option<u64>,
    /// Keep arcs scoring at least tau, 0 < tau < 1.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct MaskArgs {
    /// Mask optimization steps.
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    mask_lr: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_entropy: f64,
    #[arg(long, default_value_t = 0.005)]
    lambda_size: f64,
    /// Monte Carlo samples per feature for PDA.
    #[arg(long, default_value_t = 100)]
    pda_samples: usize,
}

#[derive(Debug, Args, Serialize)]
struct ExplainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Node ids, repeated or comma separated.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    node: Vec<usize>,
    #[arg(long, value_enum, default_value_t = EdgeMethodArg::Mmi)]
    method: EdgeMethodArg,
    #[arg(long, value_enum, default_value_t = FeatureArg::None)]
    features: FeatureArg,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Args, Serialize)]
struct MetricsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = EdgeMethodArg::Mmi)]
    method: EdgeMethodArg,
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    topk: u64,
    /// Feature-study repeats when the bundle names its important feature.
    #[arg(long, default_value_t = 10)]
    repeats: u64,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Args, Serialize)]
struct DisentangleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    topk: u64,
    #[arg(long, value_enum, default_value_t = EdgeMethodArg::Mmi)]
    method: EdgeMethodArg,
    /// Feature method behind the similarity map.
    #[arg(long, value_enum, default_value_t = FeatureArg::Ggd)]
    features: FeatureArg,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Args, Serialize)]
struct ExportDotArgs {
    #[arg(long)]
    data: PathBuf,
    /// Explanation JSON written by `explain`.
    #[arg(long)]
    explanation: PathBuf,
    /// Re-select arcs instead of reusing the saved selection.
    #[command(flatten)]
    selection: SelectionArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<commands::UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
