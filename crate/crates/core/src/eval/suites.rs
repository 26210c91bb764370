//! Robustness, ablation and sensitivity experiments. Each cell retrains
//! from scratch; cells run in parallel and are returned in input order.

use super::classify::{evaluate_classification, ClassificationOptions, EvalError, RatioScores};
use super::report::EvalReport;
use crate::config::{SamplingMode, TrainConfig, ViewMode, ZeroNormRows};
use crate::graph::{mask_attributes, perturb_edges, HeteroGraph};
use crate::trainer::{train, TrainError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the target type carries no labels")]
    NoLabels,
}

/// Trains on `g` and runs the classification protocol on the embeddings.
pub fn train_and_classify(
    g: &HeteroGraph,
    cfg: &TrainConfig,
    ratios: &[f64],
    opts: &ClassificationOptions,
) -> Result<Vec<RatioScores>, SuiteError> {
    let labels = g.labels().ok_or(SuiteError::NoLabels)?;
    let model = train(g, cfg)?;
    Ok(evaluate_classification(&model.z, labels, ratios, opts)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    EdgeDeletion,
    AttributeMasking,
}

impl Perturbation {
    pub const ALL: [Perturbation; 2] = [Perturbation::EdgeDeletion, Perturbation::AttributeMasking];

    pub fn as_str(self) -> &'static str {
        match self {
            Perturbation::EdgeDeletion => "edge_deletion",
            Perturbation::AttributeMasking => "attribute_masking",
        }
    }

    /// Perturbed copy of `g`; randomness comes from `seed`.
    pub fn apply(self, g: &HeteroGraph, level: f64, seed: u64) -> HeteroGraph {
        match self {
            Perturbation::EdgeDeletion => perturb_edges(g, level, seed),
            Perturbation::AttributeMasking => mask_attributes(g, level, seed),
        }
    }
}

pub const DEFAULT_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCell {
    pub perturbation: Perturbation,
    pub level: f64,
    pub scores: Vec<RatioScores>,
}

/// Every `(perturbation, level)` pair: perturb with `cfg.seed`, retrain,
/// classify. Masking can zero whole attribute rows, so masking cells
/// tolerate zero-norm embedding rows.
pub fn robustness_suite(
    g: &HeteroGraph,
    cfg: &TrainConfig,
    perturbations: &[Perturbation],
    levels: &[f64],
    ratios: &[f64],
    opts: &ClassificationOptions,
) -> Result<Vec<RobustnessCell>, SuiteError> {
    let cells: Vec<(Perturbation, f64)> = perturbations.iter().flat_map(|&p| levels.iter().map(move |&l| (p, l))).collect();
    cells
        .par_iter()
        .map(|&(perturbation, level)| {
            let h = perturbation.apply(g, level, cfg.seed);
            let mut c = cfg.clone();
            if perturbation == Perturbation::AttributeMasking {
                c.zero_norm_rows = ZeroNormRows::Tolerate;
            }
            let scores = train_and_classify(&h, &c, ratios, opts)?;
            Ok(RobustnessCell { perturbation, level, scores })
        })
        .collect()
}

pub fn robustness_report(cells: &[RobustnessCell], cfg: &TrainConfig) -> EvalReport {
    let mut r = EvalReport::new("robustness", cfg.seed, cfg.hash());
    for c in cells {
        r.add_classification(&format!("{}@{}", c.perturbation.as_str(), c.level), &c.scores);
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "HGCL")]
    Hgcl,
    #[serde(rename = "HGCL_topo")]
    HgclTopo,
    #[serde(rename = "HGCL_attr")]
    HgclAttr,
    #[serde(rename = "HGCL_samp_t")]
    HgclSampT,
    #[serde(rename = "HGCL_samp_a")]
    HgclSampA,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Hgcl, Variant::HgclTopo, Variant::HgclAttr, Variant::HgclSampT, Variant::HgclSampA];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hgcl => "HGCL",
            Variant::HgclTopo => "HGCL_topo",
            Variant::HgclAttr => "HGCL_attr",
            Variant::HgclSampT => "HGCL_samp_t",
            Variant::HgclSampA => "HGCL_samp_a",
        }
    }

    /// The base configuration with only `views` or `sampling` changed.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        match self {
            Variant::Hgcl => {}
            Variant::HgclTopo => c.views = ViewMode::TopologyOnly,
            Variant::HgclAttr => c.views = ViewMode::AttributeOnly,
            Variant::HgclSampT => c.sampling = SamplingMode::TopologyOnly,
            Variant::HgclSampA => c.sampling = SamplingMode::AttributeOnly,
        }
        c
    }
}

pub fn ablation_suite(
    g: &HeteroGraph,
    cfg: &TrainConfig,
    variants: &[Variant],
    ratios: &[f64],
    opts: &ClassificationOptions,
) -> Result<Vec<(Variant, Vec<RatioScores>)>, SuiteError> {
    variants.par_iter().map(|&v| Ok((v, train_and_classify(g, &v.apply(cfg), ratios, opts)?))).collect()
}

pub fn ablation_report(results: &[(Variant, Vec<RatioScores>)], cfg: &TrainConfig) -> EvalReport {
    let mut r = EvalReport::new("ablation", cfg.seed, cfg.hash());
    for (v, scores) in results {
        r.add_classification(v.name(), scores);
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub delta: f64,
    pub epsilon_a: f64,
    pub scores: Vec<RatioScores>,
}

/// Grid over `δ × ε_a`. With `delta_path` set only that meta-path's weight
/// varies; otherwise every meta-path gets the same `δ`.
pub fn sweep_config(base: &TrainConfig, delta_path: Option<&str>, delta: f64, epsilon_a: f64) -> TrainConfig {
    let mut c = base.clone();
    match delta_path {
        Some(name) => {
            c.delta.insert(name.to_string(), delta);
        }
        None => {
            c.delta.clear();
            c.delta_default = delta;
        }
    }
    c.epsilon_a = epsilon_a;
    c
}

pub fn parameter_sweep(
    g: &HeteroGraph,
    cfg: &TrainConfig,
    delta_path: Option<&str>,
    deltas: &[f64],
    epsilons: &[f64],
    ratios: &[f64],
    opts: &ClassificationOptions,
) -> Result<Vec<SweepCell>, SuiteError> {
    let grid: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| epsilons.iter().map(move |&e| (d, e))).collect();
    grid.par_iter()
        .map(|&(delta, epsilon_a)| {
            let c = sweep_config(cfg, delta_path, delta, epsilon_a);
            c.validate().map_err(TrainError::from)?;
            Ok(SweepCell { delta, epsilon_a, scores: train_and_classify(g, &c, ratios, opts)? })
        })
        .collect()
}

pub fn sweep_report(cells: &[SweepCell], cfg: &TrainConfig) -> EvalReport {
    let mut r = EvalReport::new("sweep", cfg.seed, cfg.hash());
    for c in cells {
        r.add_classification(&format!("delta={} epsilon_a={}", c.delta, c.epsilon_a), &c.scores);
    }
    r
}
