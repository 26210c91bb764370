//! Training configuration.
//!
//! The JSON form mirrors the field names of [`TrainConfig`] exactly; any
//! field may be omitted and takes its default.

use crate::autodiff::{Activation, AdamConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A threshold with optional per-name overrides (node type names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Threshold {
    pub default: f64,
    pub per_type: BTreeMap<String, f64>,
}

impl Threshold {
    pub fn uniform(default: f64) -> Self {
        Self { default, per_type: BTreeMap::new() }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.per_type.get(name).copied().unwrap_or(self.default)
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::uniform(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Activations {
    /// Mean-aggregator encoder output.
    pub encoder: Activation,
    /// Target-to-other-type attention score.
    pub hetero_score: Activation,
    /// Attention-weighted neighbour aggregation (both views).
    pub aggregate: Activation,
    /// Inner activation of semantic attention.
    pub semantic: Activation,
    /// Meta-path neighbour attention score.
    pub path_score: Activation,
}

impl Default for Activations {
    fn default() -> Self {
        Self {
            encoder: Activation::Elu,
            hetero_score: Activation::LeakyRelu,
            aggregate: Activation::Elu,
            semantic: Activation::Tanh,
            path_score: Activation::LeakyRelu,
        }
    }
}

/// Which encoders run. Single-view modes contrast the view with itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    #[default]
    Both,
    TopologyOnly,
    AttributeOnly,
}

/// Which criteria decide positive samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    Joint,
    TopologyOnly,
    AttributeOnly,
}

/// What the loss does with an all-zero embedding row, whose cosine
/// similarity is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroNormRows {
    #[default]
    Reject,
    /// Keep the row at zero so its cosine with every node is 0.
    Tolerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub hidden_dim: usize,
    /// Width of each view's output; the evaluation embedding is twice this.
    pub output_dim: usize,
    pub tau: f64,
    pub lambda: f64,
    /// Attribute-similarity threshold for positive samples.
    pub epsilon_a: f64,
    /// Topological-correlation threshold for positive samples.
    pub epsilon_t: f64,
    /// Homogeneous edge regeneration threshold, per node type.
    pub epsilon_f: Threshold,
    /// Heterogeneous edge regeneration threshold, per non-target node type.
    pub epsilon_r: Threshold,
    /// Meta-path importance weights by meta-path name.
    pub delta: BTreeMap<String, f64>,
    pub delta_default: f64,
    pub activations: Activations,
    pub seed: u64,
    /// Epochs without relative improvement before stopping; 0 disables.
    pub patience: usize,
    pub min_relative_improvement: f64,
    pub views: ViewMode,
    pub sampling: SamplingMode,
    pub zero_norm_rows: ZeroNormRows,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            hidden_dim: 128,
            output_dim: 64,
            tau: 0.4,
            lambda: 0.5,
            epsilon_a: 0.5,
            epsilon_t: 1.0,
            epsilon_f: Threshold::uniform(0.5),
            epsilon_r: Threshold::uniform(0.5),
            delta: BTreeMap::new(),
            delta_default: 1.0,
            activations: Activations::default(),
            seed: 0,
            patience: 20,
            min_relative_improvement: 1e-4,
            views: ViewMode::Both,
            sampling: SamplingMode::Joint,
            zero_norm_rows: ZeroNormRows::Reject,
        }
    }
}

impl TrainConfig {
    /// Per-view width 32, so the concatenated embedding has 64 dimensions.
    pub fn compact() -> Self {
        Self { output_dim: 32, ..Self::default() }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }

    pub fn delta_for(&self, meta_path: &str) -> f64 {
        self.delta.get(meta_path).copied().unwrap_or(self.delta_default)
    }

    pub fn embedding_dim(&self) -> usize {
        match self.views {
            ViewMode::Both => 2 * self.output_dim,
            _ => self.output_dim,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive".into());
        }
        let thresholds = [("epsilon_a", self.epsilon_a), ("epsilon_t", self.epsilon_t)]
            .into_iter()
            .chain([("epsilon_f", self.epsilon_f.default), ("epsilon_r", self.epsilon_r.default)])
            .chain(self.epsilon_f.per_type.values().map(|&v| ("epsilon_f", v)))
            .chain(self.epsilon_r.per_type.values().map(|&v| ("epsilon_r", v)));
        for (name, v) in thresholds {
            if v.is_nan() || v < 0.0 {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        for (name, &d) in self.delta.iter().map(|(k, v)| (k.as_str(), v)).chain([("delta_default", &self.delta_default)]) {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("delta for {name} must lie in [0, 1], got {d}"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse { path: "<config>".into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.display().to_string(), message },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
