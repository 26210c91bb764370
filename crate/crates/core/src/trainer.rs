//! Preprocessing, the full-batch training loop and embedding export.

use crate::attr_view::{cosine_matrix, AttrInputs, AttrView};
use crate::autodiff::{save_checkpoint, Adam, AutodiffError, CheckpointError, ParamStore, Tape, Var};
use crate::config::{ConfigError, SamplingMode, TrainConfig, ViewMode};
use crate::contrast::{correlation_matrix, final_loss_with, select_samples, view_contrastive_loss_with, ContrastError, LossMasks, SampleSets};
use crate::graph::{meta_path_neighbors, GraphError, HeteroGraph, MetaPathAdjacency};
use crate::matrix::Matrix;
use crate::rng::substream;
use crate::topo_view::TopoView;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("non-finite value at epoch {epoch}, first produced by {op}")]
    NonFinite { epoch: usize, op: String },
    #[error("epoch {epoch}: {source}")]
    Contrast { epoch: usize, source: ContrastError },
    #[error("epoch {epoch}: {source}")]
    Autodiff { epoch: usize, source: AutodiffError },
    #[error("the configuration needs meta-paths but the graph declares none")]
    NoMetaPaths,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {message}")]
    Embeddings { path: String, message: String },
}

/// Everything fixed before the first epoch.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Attributes and homogeneous graphs per node type; absent when the
    /// attribute view is disabled.
    pub attr_inputs: Option<AttrInputs>,
    pub target_attributes: Matrix,
    /// One adjacency per configured meta-path; empty when neither the
    /// topology view nor topology-based sampling needs them.
    pub adjacencies: Vec<MetaPathAdjacency>,
    pub samples: SampleSets,
    pub masks: LossMasks,
}

fn uses_topology(cfg: &TrainConfig) -> bool {
    cfg.views != ViewMode::AttributeOnly || cfg.sampling != SamplingMode::AttributeOnly
}

/// Effective `(ε_a, ε_t)` for the configured sampling mode. Dropping a
/// criterion means making its threshold vacuous.
pub fn sampling_thresholds(cfg: &TrainConfig) -> (f64, f64) {
    match cfg.sampling {
        SamplingMode::Joint => (cfg.epsilon_a, cfg.epsilon_t),
        SamplingMode::TopologyOnly => (f64::NEG_INFINITY, cfg.epsilon_t),
        SamplingMode::AttributeOnly => (cfg.epsilon_a, 0.0),
    }
}

pub fn preprocess(g: &HeteroGraph, cfg: &TrainConfig) -> Result<Preprocessed, TrainError> {
    cfg.validate()?;
    let n = g.target_count();
    let adjacencies = if uses_topology(cfg) {
        if g.meta_paths().is_empty() {
            return Err(TrainError::NoMetaPaths);
        }
        g.meta_paths().iter().map(|m| meta_path_neighbors(g, m)).collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let delta: Vec<f64> = g.meta_paths().iter().take(adjacencies.len()).map(|m| cfg.delta_for(&m.name)).collect();
    let correlation = correlation_matrix(&delta, &adjacencies, n);
    let target_attributes = g.target_attributes().clone();
    let similarity = cosine_matrix(&target_attributes, &target_attributes);
    let (eps_a, eps_t) = sampling_thresholds(cfg);
    let samples = select_samples(similarity, correlation, eps_a, eps_t);
    let masks = samples.masks();
    let attr_inputs = (cfg.views != ViewMode::TopologyOnly).then(|| AttrInputs::prepare(g, cfg));
    Ok(Preprocessed { attr_inputs, target_attributes, adjacencies, samples, masks })
}

/// Parameters plus the encoders that read them.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ParamStore,
    attr: Option<AttrView>,
    topo: Option<TopoView>,
}

/// View outputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ViewOutputs {
    pub z_attr: Option<Var>,
    pub z_topo: Option<Var>,
}

impl Model {
    /// Builds only the encoders the configuration uses, initialised from the
    /// `init` substream of the root seed.
    pub fn new(g: &HeteroGraph, cfg: &TrainConfig) -> Self {
        let mut rng = substream(cfg.seed, "init");
        let mut params = ParamStore::new();
        let attr = (cfg.views != ViewMode::TopologyOnly).then(|| AttrView::new(&mut params, g, cfg, &mut rng));
        let topo = (cfg.views != ViewMode::AttributeOnly).then(|| {
            let names: Vec<String> = g.meta_paths().iter().map(|m| m.name.clone()).collect();
            TopoView::new(&mut params, g.target_attributes().cols(), &names, cfg, &mut rng)
        });
        Self { params, attr, topo }
    }

    pub fn attr_view(&self) -> Option<&AttrView> {
        self.attr.as_ref()
    }

    pub fn topo_view(&self) -> Option<&TopoView> {
        self.topo.as_ref()
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], prep: &Preprocessed) -> Result<ViewOutputs, AutodiffError> {
        let z_attr = match (&self.attr, &prep.attr_inputs) {
            (Some(view), Some(inputs)) => Some(view.forward(tape, vars, inputs, None)?.z),
            _ => None,
        };
        let z_topo = match &self.topo {
            Some(view) => {
                let x = tape.constant(prep.target_attributes.clone());
                Some(view.forward(tape, vars, x, &prep.adjacencies)?.z)
            }
            None => None,
        };
        Ok(ViewOutputs { z_attr, z_topo })
    }

    /// Contrastive objective. A single enabled view is contrasted with itself.
    pub fn loss(&self, tape: &mut Tape, out: ViewOutputs, masks: &LossMasks, cfg: &TrainConfig) -> Result<Var, ContrastError> {
        match (out.z_topo, out.z_attr) {
            (Some(t), Some(a)) => final_loss_with(tape, t, a, masks, cfg.tau, cfg.lambda, cfg.zero_norm_rows),
            (Some(z), None) | (None, Some(z)) => view_contrastive_loss_with(tape, z, z, masks, cfg.tau, cfg.zero_norm_rows),
            (None, None) => unreachable!("at least one view is always built"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ParamStore,
    pub config: TrainConfig,
    pub z_attr: Option<Matrix>,
    pub z_topo: Option<Matrix>,
    /// `Z_attr ‖ Z_topo`, or the single enabled view.
    pub z: Matrix,
    /// Loss before each parameter update.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainedModel {
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        Ok(save_checkpoint(path, &self.params, &self.config.to_json())?)
    }
}

fn classify(epoch: usize, e: AutodiffError) -> TrainError {
    match e {
        AutodiffError::NonFinite { op } => TrainError::NonFinite { epoch, op },
        source => TrainError::Autodiff { epoch, source },
    }
}

fn classify_contrast(epoch: usize, e: ContrastError) -> TrainError {
    match e {
        ContrastError::Autodiff(inner) => classify(epoch, inner),
        source => TrainError::Contrast { epoch, source },
    }
}

pub fn train(g: &HeteroGraph, cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    let prep = preprocess(g, cfg)?;
    train_preprocessed(g, &prep, cfg)
}

/// Runs the epoch loop on artifacts from [`preprocess`] with the same
/// graph and configuration.
pub fn train_preprocessed(g: &HeteroGraph, prep: &Preprocessed, cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    let mut model = Model::new(g, cfg);
    let mut adam = Adam::new(cfg.adam(), model.params.values());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let vars = model.params.load(&mut tape);
        let out = model.forward(&mut tape, &vars, prep).map_err(|e| classify(epoch, e))?;
        let loss = model.loss(&mut tape, out, &prep.masks, cfg).map_err(|e| classify_contrast(epoch, e))?;
        let value = tape.value(loss).get(0, 0);
        history.push(value);
        tape.backward(loss).map_err(|e| classify(epoch, e))?;
        let grads = model.params.gradients(&tape, &vars);
        adam.step(model.params.values_mut(), &grads);

        if cfg.patience > 0 {
            if best.is_infinite() || (best - value) / best.abs().max(f64::MIN_POSITIVE) >= cfg.min_relative_improvement {
                best = value;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let epochs = history.len();
    let mut tape = Tape::new();
    let vars = model.params.load(&mut tape);
    let out = model.forward(&mut tape, &vars, prep).map_err(|e| classify(epochs, e))?;
    let z_attr = out.z_attr.map(|v| tape.value(v).clone());
    let z_topo = out.z_topo.map(|v| tape.value(v).clone());
    let z = match (&z_attr, &z_topo) {
        (Some(a), Some(t)) => Matrix::hconcat(&[a, t]),
        (Some(z), None) | (None, Some(z)) => z.clone(),
        (None, None) => unreachable!("at least one view is always built"),
    };
    Ok(TrainedModel { params: model.params, config: cfg.clone(), z_attr, z_topo, z, loss_history: history, stopped_early })
}

/// CSV with header `node_index,v0,…,v{d-1}`; values use the shortest
/// representation that parses back to the same `f64`.
pub fn export_embeddings(z: &Matrix, path: &Path) -> Result<(), TrainError> {
    let io = |e: std::io::Error| TrainError::Embeddings { path: path.display().to_string(), message: e.to_string() };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let header: Vec<String> = std::iter::once("node_index".to_string()).chain((0..z.cols()).map(|c| format!("v{c}"))).collect();
    writeln!(f, "{}", header.join(",")).map_err(io)?;
    for (i, row) in z.row_iter().enumerate() {
        write!(f, "{i}").map_err(io)?;
        for v in row {
            write!(f, ",{v}").map_err(io)?;
        }
        writeln!(f).map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<Matrix, TrainError> {
    let fail = |message: String| TrainError::Embeddings { path: path.display().to_string(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let cols = reader.headers().map_err(|e| fail(e.to_string()))?.len().saturating_sub(1);
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let index: usize = record[0].trim().parse().map_err(|_| fail(format!("line {}: bad node index", line + 2)))?;
        if index != rows {
            return Err(fail(format!("line {}: expected node {rows}, found {index}", line + 2)));
        }
        for field in record.iter().skip(1) {
            data.push(field.trim().parse::<f64>().map_err(|_| fail(format!("line {}: bad value {field:?}", line + 2)))?);
        }
        rows += 1;
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn write_loss_history(history: &[f64], path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,loss")?;
    for (e, l) in history.iter().enumerate() {
        writeln!(f, "{e},{l}")?;
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::author_chain;

    fn small() -> TrainConfig {
        TrainConfig { hidden_dim: 4, output_dim: 3, epochs: 3, epsilon_a: 0.0, epsilon_t: 0.0, ..TrainConfig::default() }
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let g = author_chain();
        let m = train(&g, &TrainConfig { epochs: 0, ..small() }).unwrap();
        assert!(m.loss_history.is_empty());
        assert_eq!(m.z.shape(), (g.target_count(), 6));
    }

    #[test]
    fn single_view_shapes() {
        let g = author_chain();
        for views in [ViewMode::TopologyOnly, ViewMode::AttributeOnly] {
            let cfg = TrainConfig { views, ..small() };
            let m = train(&g, &cfg).unwrap();
            assert_eq!(m.z.shape(), (g.target_count(), 3));
            assert_eq!(m.loss_history.len(), 3);
            assert_eq!(m.z_attr.is_some(), views == ViewMode::AttributeOnly);
        }
    }

    #[test]
    fn sampling_modes_relax_one_criterion() {
        let cfg = TrainConfig { epsilon_a: 0.7, epsilon_t: 2.0, ..TrainConfig::default() };
        assert_eq!(sampling_thresholds(&cfg), (0.7, 2.0));
        let t = TrainConfig { sampling: SamplingMode::TopologyOnly, ..cfg.clone() };
        assert_eq!(sampling_thresholds(&t), (f64::NEG_INFINITY, 2.0));
        let a = TrainConfig { sampling: SamplingMode::AttributeOnly, ..cfg };
        assert_eq!(sampling_thresholds(&a), (0.7, 0.0));
    }

    #[test]
    fn embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let z = Matrix::from_rows(&[[0.1, -2.5e-17, 3.0], [1.0 / 3.0, 0.0, -7.25]]);
        export_embeddings(&z, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node_index,v0,v1,v2\n0,"));
        assert_eq!(read_embeddings(&path).unwrap(), z);
    }
}
