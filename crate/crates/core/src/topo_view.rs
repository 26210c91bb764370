//! Topology-guided view: attention over meta-path neighbours, then
//! semantic attention across meta-paths.
//!
//! Only target-type attributes enter this view. They are projected once to
//! the hidden width; intermediate node types on a meta-path contribute
//! connectivity only.

use crate::autodiff::{Activation, ParamId, ParamStore, Result, Tape, Var};
use crate::config::TrainConfig;
use crate::graph::MetaPathAdjacency;
use crate::semantic::SemanticAttention;
use rand::Rng;

/// The two halves of a meta-path attention vector `s = [s_self ‖ s_neighbor]`,
/// so `sᵀ[h_i ‖ h_j] = h_i·s_self + h_j·s_neighbor`.
#[derive(Debug, Clone, Copy)]
pub struct PathAttention {
    pub self_half: Var,
    pub neighbor_half: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct PathAggregate {
    pub h: Var,
    /// Attention coefficients in the adjacency's CSR order.
    pub gamma: Var,
}

/// `γ_ij = softmax_{j∈N_i}(σ_s(sᵀ[h_i ‖ h_j]))`, `h_i^M = σ_a(Σ_j γ_ij h_j)`.
pub fn metapath_attention_aggregate(
    tape: &mut Tape,
    h: Var,
    adj: &MetaPathAdjacency,
    attention: PathAttention,
    score_activation: Activation,
    aggregate_activation: Activation,
) -> Result<PathAggregate> {
    let offsets = adj.offsets();
    let members = adj.members();
    let src: Vec<usize> = (0..adj.num_nodes()).flat_map(|i| std::iter::repeat_n(i, offsets[i + 1] - offsets[i])).collect();
    let a_self = tape.matmul(h, attention.self_half)?;
    let a_nbr = tape.matmul(h, attention.neighbor_half)?;
    let l = tape.gather_rows(a_self, &src)?;
    let r = tape.gather_rows(a_nbr, members)?;
    let logits = tape.add(l, r)?;
    let logits = tape.activate(logits, score_activation)?;
    let gamma = tape.segment_softmax(logits, offsets)?;
    let agg = tape.segment_weighted_sum(gamma, h, members, offsets)?;
    let out = tape.activate(agg, aggregate_activation)?;
    Ok(PathAggregate { h: out, gamma })
}

#[derive(Debug, Clone)]
pub struct TopoView {
    input: ParamId,
    paths: Vec<(ParamId, ParamId)>,
    semantic: SemanticAttention,
    output: ParamId,
    score_activation: Activation,
    aggregate_activation: Activation,
}

#[derive(Debug, Clone)]
pub struct TopoForward {
    /// `n_t × output_dim` view output.
    pub z: Var,
    /// Meta-path weights, in configuration order.
    pub eta: Var,
    pub per_path: Vec<PathAggregate>,
}

impl TopoView {
    pub fn new<R: Rng>(store: &mut ParamStore, input_dim: usize, path_names: &[String], cfg: &TrainConfig, rng: &mut R) -> Self {
        let h = cfg.hidden_dim;
        let input = store.glorot("topo.input", input_dim, h, rng);
        let paths = path_names
            .iter()
            .map(|name| {
                (
                    store.glorot(format!("topo.path.{name}.self"), h, 1, rng),
                    store.glorot(format!("topo.path.{name}.neighbor"), h, 1, rng),
                )
            })
            .collect();
        let semantic = SemanticAttention::new(store, "topo.semantic", h, h, 1, cfg.activations.semantic, rng);
        let output = store.glorot("topo.output", h, cfg.output_dim, rng);
        Self {
            input,
            paths,
            semantic,
            output,
            score_activation: cfg.activations.path_score,
            aggregate_activation: cfg.activations.aggregate,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut out = vec![self.input];
        out.extend(self.paths.iter().flat_map(|&(a, b)| [a, b]));
        out.extend(self.semantic.params());
        out.push(self.output);
        out
    }

    /// `adjacencies[p]` must belong to the `p`-th configured meta-path.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var, adjacencies: &[MetaPathAdjacency]) -> Result<TopoForward> {
        assert_eq!(adjacencies.len(), self.paths.len(), "one adjacency per configured meta-path");
        let h = tape.matmul(x, vars[self.input.index()])?;
        let mut per_path = Vec::with_capacity(self.paths.len());
        for (adj, &(s, n)) in adjacencies.iter().zip(&self.paths) {
            let attention = PathAttention { self_half: vars[s.index()], neighbor_half: vars[n.index()] };
            per_path.push(metapath_attention_aggregate(
                tape,
                h,
                adj,
                attention,
                self.score_activation,
                self.aggregate_activation,
            )?);
        }
        let groups: Vec<Var> = per_path.iter().map(|p| p.h).collect();
        let fused = self.semantic.fuse(tape, vars, &groups)?;
        let z = tape.matmul(fused.output, vars[self.output.index()])?;
        Ok(TopoForward { z, eta: fused.weights, per_path })
    }
}
