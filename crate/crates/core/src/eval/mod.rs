//! Evaluation protocols: node classification, clustering, robustness,
//! ablations, parameter sweeps and a synthetic benchmark generator.

mod classify;
mod cluster;
pub mod metrics;
mod report;
mod suites;
mod synthetic;

pub use classify::{
    evaluate_classification, majority_baseline, ClassificationOptions, EvalError, LinearOvr, RatioScores, SvmConfig, DEFAULT_RATIOS,
};
pub use cluster::{evaluate_clustering, kmeans, ClusteringScores, KMeansResult, MAX_ITERATIONS, N_INIT};
pub use report::{EvalReport, Metric, MetricRow, NMI_NORMALIZATION};
pub use suites::{
    ablation_report, ablation_suite, parameter_sweep, robustness_report, robustness_suite, sweep_config, sweep_report,
    train_and_classify, Perturbation, RobustnessCell, SuiteError, SweepCell, Variant, DEFAULT_LEVELS,
};
pub use synthetic::{generate_synthetic, AuxSpec, SyntheticSpec, TARGET_TYPE};
