//! `hgcl`: dataset synthesis, training and the evaluation protocols.
//!
//! Failures print one JSON object on stderr, `{"error":<kind>,"message":<text>}`,
//! and exit with status 1. Usage errors exit with status 2.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "hgcl", version, about = "Heterogeneous graph contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Training configuration (JSON); defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Training ratios.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.4, 0.6, 0.8])]
    ratios: Vec<f64>,
    /// Repeats per ratio.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic heterogeneous dataset.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 150)]
        per_class: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Probability that a node's own class dimensions are active.
        #[arg(long)]
        signal: Option<f64>,
        /// Probability that any other dimension is active.
        #[arg(long)]
        noise: Option<f64>,
        /// Full generator specification (JSON); other flags override it.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Train on a dataset and write embeddings, a checkpoint and the loss history.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Node classification on trained embeddings.
    Classify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        /// Embeddings CSV written by `train`.
        #[arg(short, long)]
        embeddings: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// k-means clustering of trained embeddings.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        embeddings: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Retrain and classify under edge deletion and attribute masking.
    Robustness {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75])]
        levels: Vec<f64>,
        /// Any of edge_deletion, attribute_masking.
        #[arg(long, value_delimiter = ',', default_values_t = vec!["edge_deletion".to_string(), "attribute_masking".to_string()])]
        perturbations: Vec<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Train and classify every ablation variant.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Subset of HGCL, HGCL_topo, HGCL_attr, HGCL_samp_t, HGCL_samp_a.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Grid over meta-path weight and attribute-similarity threshold.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        epsilons: Vec<f64>,
        /// Vary only this meta-path's weight; all weights move together otherwise.
        #[arg(long)]
        delta_path: Option<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Print dataset statistics for dataset directories or count files (JSON).
    Inspect {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Graph(#[from] hgcl_core::GraphError),
    #[error(transparent)]
    Config(#[from] hgcl_core::ConfigError),
    #[error(transparent)]
    Train(#[from] hgcl_core::TrainError),
    #[error(transparent)]
    Eval(#[from] hgcl_core::EvalError),
    #[error(transparent)]
    Suite(#[from] hgcl_core::SuiteError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Graph(_) => "graph",
            CliError::Config(_) => "config",
            CliError::Train(_) => "train",
            CliError::Eval(_) => "eval",
            CliError::Suite(_) => "suite",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HGCL_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("HGCL_THREADS must be a positive integer, got {v:?}"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
