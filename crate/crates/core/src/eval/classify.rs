//! Linear one-vs-rest hinge-loss classifier and the split protocol.

use super::metrics::{f1_scores, mean_std};
use crate::matrix::{dot, Matrix};
use crate::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{embedded} embedded nodes but {labels} labels")]
    LabelCount { embedded: usize, labels: usize },
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("training ratio {0} leaves an empty train or test split")]
    BadRatio(f64),
    #[error("no split at ratio {ratio} contains every class after {attempts} attempts")]
    SplitExhausted { ratio: f64, attempts: usize },
    #[error("k = {k} is invalid for {n} points")]
    BadK { k: usize, n: usize },
}

/// Subgradient-descent settings for the hinge-loss classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvmConfig {
    /// L2 regularisation strength.
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, epochs: 60 }
    }
}

/// One hyperplane per class over standardized features.
#[derive(Debug, Clone)]
pub struct LinearOvr {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `k × (d + 1)`; the last column is the bias.
    weights: Matrix,
    /// Set when no training feature varies: the majority training class,
    /// predicted for every input.
    prior: Option<usize>,
}

fn standardizer(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = x.shape();
    let mut mean = vec![0.0; d];
    for row in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mut var = vec![0.0; d];
    for row in x.row_iter() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2) / n as f64;
        }
    }
    let scale = var.into_iter().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }).collect();
    (mean, scale)
}

impl LinearOvr {
    /// Pegasos-style stochastic subgradient descent on
    /// `λ/2‖w‖² + mean_i max(0, 1 − y_i (w·x_i + b))` per class, returning
    /// the average of the iterates over the second half of training.
    /// Without any varying feature the hyperplanes would differ only by
    /// optimisation noise, so the majority class is predicted instead
    /// (ties go to the smallest label).
    pub fn fit<R: Rng>(x: &Matrix, y: &[usize], k: usize, cfg: SvmConfig, rng: &mut R) -> Self {
        let (n, d) = x.shape();
        let (mean, scale) = standardizer(x);
        if scale.iter().all(|&s| s == 0.0) {
            let mut counts = vec![0usize; k];
            for &c in y {
                counts[c] += 1;
            }
            let majority = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
            return Self { mean, scale, weights: Matrix::zeros(k, d + 1), prior: Some(majority) };
        }
        let feats: Vec<Vec<f64>> = x
            .row_iter()
            .map(|r| r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) * s).chain([1.0]).collect())
            .collect();
        let total = cfg.epochs * n;
        let mut weights = Matrix::zeros(k, d + 1);
        let mut order: Vec<usize> = (0..n).collect();
        let mut ws = vec![vec![0.0; d + 1]; k];
        let mut avg = vec![vec![0.0; d + 1]; k];
        let mut averaged = 0usize;
        let mut t = 0usize;
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (cfg.lambda * t as f64);
                let decay = 1.0 - eta * cfg.lambda;
                for (c, w) in ws.iter_mut().enumerate() {
                    let target = if y[i] == c { 1.0 } else { -1.0 };
                    let margin = target * dot(w, &feats[i]);
                    for v in w.iter_mut() {
                        *v *= decay;
                    }
                    if margin < 1.0 {
                        for (v, f) in w.iter_mut().zip(&feats[i]) {
                            *v += eta * target * f;
                        }
                    }
                }
                if 2 * t > total {
                    averaged += 1;
                    for (a, w) in avg.iter_mut().zip(&ws) {
                        for (s, v) in a.iter_mut().zip(w) {
                            *s += v;
                        }
                    }
                }
            }
        }
        for (c, a) in avg.iter().enumerate() {
            for (j, s) in a.iter().enumerate() {
                weights.set(c, j, s / averaged.max(1) as f64);
            }
        }
        Self { mean, scale, weights, prior: None }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        if let Some(c) = self.prior {
            return c;
        }
        let f: Vec<f64> = row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) * s).chain([1.0]).collect();
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..self.weights.rows() {
            let s = dot(self.weights.row(c), &f);
            if s > best.1 {
                best = (c, s);
            }
        }
        best.0
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Macro/Micro-F1 over repeated random splits at one training ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioScores {
    pub ratio: f64,
    pub macro_f1: Vec<f64>,
    pub micro_f1: Vec<f64>,
    /// Splits redrawn because some class was missing from training.
    pub resampled: usize,
}

impl RatioScores {
    pub fn macro_mean_std(&self) -> (f64, f64) {
        mean_std(&self.macro_f1)
    }

    pub fn micro_mean_std(&self) -> (f64, f64) {
        mean_std(&self.micro_f1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationOptions {
    pub repeats: usize,
    pub seed: u64,
    pub svm: SvmConfig,
    pub max_resamples: usize,
}

impl Default for ClassificationOptions {
    fn default() -> Self {
        Self { repeats: 10, seed: 0, svm: SvmConfig::default(), max_resamples: 1000 }
    }
}

pub const DEFAULT_RATIOS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

fn num_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Draws a random split whose training part holds every class; returns
/// `(train, test, redraws)`.
fn draw_split<R: Rng>(
    labels: &[usize],
    k: usize,
    n_train: usize,
    ratio: f64,
    max_resamples: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>, usize), EvalError> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    for attempt in 0..=max_resamples {
        idx.shuffle(rng);
        let mut seen = vec![false; k];
        for &i in &idx[..n_train] {
            seen[labels[i]] = true;
        }
        if seen.iter().all(|&s| s) {
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            return Ok((train, test, attempt));
        }
    }
    Err(EvalError::SplitExhausted { ratio, attempts: max_resamples + 1 })
}

/// Trains on a `ratio` fraction of labelled nodes and scores the rest,
/// `repeats` times per ratio. Repeat `r` at ratio `p` draws from the
/// substream `split-{p}-{r}` of `opts.seed`, so the result does not
/// depend on scheduling.
pub fn evaluate_classification(
    z: &Matrix,
    labels: &[usize],
    ratios: &[f64],
    opts: &ClassificationOptions,
) -> Result<Vec<RatioScores>, EvalError> {
    if z.rows() != labels.len() {
        return Err(EvalError::LabelCount { embedded: z.rows(), labels: labels.len() });
    }
    let k = num_classes(labels);
    if k < 2 {
        return Err(EvalError::TooFewClasses(k));
    }
    ratios
        .iter()
        .map(|&ratio| {
            let n_train = (ratio * labels.len() as f64).round() as usize;
            if n_train == 0 || n_train >= labels.len() {
                return Err(EvalError::BadRatio(ratio));
            }
            let runs: Vec<(f64, f64, usize)> = (0..opts.repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = substream(opts.seed, &format!("split-{ratio}-{r}"));
                    let (train, test, redraws) = draw_split(labels, k, n_train, ratio, opts.max_resamples, &mut rng)?;
                    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                    let model = LinearOvr::fit(&z.select_rows(&train), &y_train, k, opts.svm, &mut rng);
                    let pred = model.predict(&z.select_rows(&test));
                    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
                    let (ma, mi) = f1_scores(&truth, &pred);
                    Ok((ma, mi, redraws))
                })
                .collect::<Result<_, EvalError>>()?;
            Ok(RatioScores {
                ratio,
                macro_f1: runs.iter().map(|r| r.0).collect(),
                micro_f1: runs.iter().map(|r| r.1).collect(),
                resampled: runs.iter().map(|r| r.2).sum(),
            })
        })
        .collect()
}

/// The classification protocol for a classifier that always predicts the
/// training split's majority class, on the same splits as
/// [`evaluate_classification`] with the same options.
pub fn majority_baseline(labels: &[usize], ratios: &[f64], opts: &ClassificationOptions) -> Result<Vec<RatioScores>, EvalError> {
    evaluate_classification(&Matrix::zeros(labels.len(), 1), labels, ratios, opts)
}
