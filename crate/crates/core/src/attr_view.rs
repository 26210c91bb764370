//! Attribute-guided view.
//!
//! Graph structure is rebuilt from attributes instead of taken from the
//! input edges:
//!
//! 1. every node type gets a homogeneous graph linking nodes whose raw
//!    attribute cosine similarity reaches `ε^f`;
//! 2. a mean aggregator encodes each type on its own graph, giving `H^f`;
//! 3. target nodes are linked to nodes of every other type whose projected
//!    representations reach cosine similarity `ε^r`;
//! 4. target nodes attend over each type's neighbours, giving one
//!    representation group per other type;
//! 5. semantic attention fuses `H^t` with those groups.
//!
//! Step 3 is recomputed on every forward pass from the current parameters
//! and is not differentiated through.

use crate::autodiff::{Activation, ParamId, ParamStore, Result, Tape, Var};
use crate::config::{Activations, TrainConfig};
use crate::graph::HeteroGraph;
use crate::matrix::{dot, norm, Matrix};
use crate::semantic::SemanticAttention;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("cosine similarity of vectors with {0} and {1} dimensions")]
pub struct DimensionMismatch(pub usize, pub usize);

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, DimensionMismatch> {
    if a.len() != b.len() {
        return Err(DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Row-normalised copy; zero rows stay zero.
pub fn normalize_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let n = norm(x.row(r));
        if n > 0.0 {
            out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

/// Pairwise cosine similarity between the rows of `a` and the rows of `b`.
pub fn cosine_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    normalize_rows(a).matmul_nt(&normalize_rows(b))
}

/// Symmetric adjacency without self-loops, as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousGraph {
    neighbors: Vec<Vec<usize>>,
}

impl HomogeneousGraph {
    pub fn from_lists(neighbors: Vec<Vec<usize>>) -> Self {
        Self { neighbors }
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, l) in self.neighbors.iter().enumerate() {
            out.extend(l.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// CSR lists for the mean aggregator; isolated nodes list themselves.
    fn aggregation_lists(&self) -> (Vec<usize>, Vec<usize>) {
        let mut offsets = vec![0];
        let mut members = Vec::new();
        for (i, l) in self.neighbors.iter().enumerate() {
            if l.is_empty() {
                members.push(i);
            } else {
                members.extend_from_slice(l);
            }
            offsets.push(members.len());
        }
        (offsets, members)
    }
}

/// Links `i ≠ j` whenever the cosine similarity of their attribute rows is
/// at least `threshold`.
pub fn build_homogeneous_graph(x: &Matrix, threshold: f64) -> HomogeneousGraph {
    let xn = normalize_rows(x);
    let n = x.rows();
    // Zero rows have similarity 0 with everything and stay isolated.
    let zero: Vec<bool> = xn.row_iter().map(|r| r.iter().all(|&v| v == 0.0)).collect();
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            if zero[i] {
                return Vec::new();
            }
            (0..n).filter(|&j| j != i && !zero[j] && dot(xn.row(i), xn.row(j)) >= threshold).collect()
        })
        .collect();
    HomogeneousGraph { neighbors }
}

/// Pairs `(i, j)` of rows with `cos(a_i, b_j) ≥ threshold`, sorted.
pub fn threshold_pairs(a: &Matrix, b: &Matrix, threshold: f64) -> Vec<(usize, usize)> {
    let s = cosine_matrix(a, b);
    let mut out = Vec::new();
    for i in 0..s.rows() {
        out.extend(s.row(i).iter().enumerate().filter(|(_, &v)| v >= threshold).map(|(j, _)| (i, j)));
    }
    out
}

/// Target-to-other-type edges from `cos(H^t W_t, H^f W_f) ≥ threshold`.
pub fn build_hetero_edges(h_t: &Matrix, h_f: &Matrix, w_t: &Matrix, w_f: &Matrix, threshold: f64) -> Vec<(usize, usize)> {
    threshold_pairs(&h_t.matmul(w_t), &h_f.matmul(w_f), threshold)
}

/// One mean-aggregator layer: `h_i = σ(W · [x_i ‖ mean_{j∈N(i)} x_j])`;
/// an isolated node uses its own `x_i` as the neighbour mean.
pub fn sage_encode(tape: &mut Tape, graph: &HomogeneousGraph, x: Var, weight: Var, activation: Activation) -> Result<Var> {
    let (offsets, members) = graph.aggregation_lists();
    let mean = tape.masked_mean_rows(x, &offsets, &members)?;
    let cat = tape.row_concat(&[x, mean])?;
    let h = tape.matmul(cat, weight)?;
    tape.activate(h, activation)
}

/// Result of attending from target nodes over one type's neighbours.
#[derive(Debug, Clone)]
pub struct HeteroAggregate {
    /// `n_t × d` representations; rows of nodes without neighbours are zero.
    pub z: Var,
    /// `E×1` attention coefficients in edge order.
    pub alpha: Var,
    /// Target nodes with no neighbour of this type.
    pub isolated: Vec<usize>,
}

/// Attention aggregation over a bipartite edge list sorted by target node.
///
/// `e_ij = σ_s(query_i · keys_j)` is normalised by softmax over each target
/// node's neighbours and `z_i = σ_a(Σ_j α_ij keys_j)`. Pass
/// `query = (H^t W_t) W` and `keys = H^f W_f` for the bilinear score.
pub fn hetero_attention_aggregate(
    tape: &mut Tape,
    query: Var,
    keys: Var,
    edges: &[(usize, usize)],
    score_activation: Activation,
    aggregate_activation: Activation,
) -> Result<HeteroAggregate> {
    let n = tape.shape(query).0;
    debug_assert!(edges.windows(2).all(|w| w[0].0 <= w[1].0), "edges must be sorted by target node");
    let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let mut offsets = vec![0usize; n + 1];
    for &i in &src {
        offsets[i + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| offsets[i] == offsets[i + 1]).collect();
    let mut compact = offsets.clone();
    compact.dedup();

    let d = tape.shape(keys).1;
    if edges.is_empty() {
        let z = tape.constant(Matrix::zeros(n, d));
        let alpha = tape.constant(Matrix::zeros(0, 1));
        return Ok(HeteroAggregate { z, alpha, isolated });
    }
    let e = tape.edge_dot(query, keys, &src, &dst)?;
    let e = tape.activate(e, score_activation)?;
    let alpha = tape.segment_softmax(e, &compact)?;
    let agg = tape.segment_weighted_sum(alpha, keys, &dst, &offsets)?;
    let z = tape.activate(agg, aggregate_activation)?;
    Ok(HeteroAggregate { z, alpha, isolated })
}

#[derive(Debug, Clone)]
struct TypeParams {
    encoder: ParamId,
    projection: ParamId,
}

/// Learnable parameters of the attribute-guided view.
#[derive(Debug, Clone)]
pub struct AttrView {
    types: Vec<TypeParams>,
    bilinear: ParamId,
    semantic: SemanticAttention,
    output: ParamId,
    target: usize,
    others: Vec<usize>,
    hetero_thresholds: Vec<f64>,
    activations: Activations,
}

/// Inputs fixed before training: attributes and homogeneous graphs.
#[derive(Debug, Clone)]
pub struct AttrInputs {
    pub attributes: Vec<Matrix>,
    pub graphs: Vec<HomogeneousGraph>,
}

impl AttrInputs {
    pub fn prepare(g: &HeteroGraph, cfg: &TrainConfig) -> Self {
        let attributes: Vec<Matrix> = (0..g.node_types().len()).map(|t| g.attributes(t).clone()).collect();
        let graphs = g
            .node_types()
            .iter()
            .zip(&attributes)
            .map(|(name, x)| build_homogeneous_graph(x, cfg.epsilon_f.get(name)))
            .collect();
        Self { attributes, graphs }
    }
}

/// Regenerated target-to-other-type edges, one list per other type.
pub type HeteroEdges = Vec<Vec<(usize, usize)>>;

#[derive(Debug, Clone)]
pub struct AttrForward {
    /// `n_t × output_dim` view output.
    pub z: Var,
    /// Type-group weights; group 0 is the target type itself.
    pub beta: Var,
    pub alphas: Vec<Var>,
    pub edges: HeteroEdges,
    /// Per other type, target nodes that received no neighbour.
    pub isolated: Vec<Vec<usize>>,
}

impl AttrView {
    pub fn new<R: Rng>(store: &mut ParamStore, g: &HeteroGraph, cfg: &TrainConfig, rng: &mut R) -> Self {
        let h = cfg.hidden_dim;
        let types = g
            .node_types()
            .iter()
            .enumerate()
            .map(|(t, name)| TypeParams {
                encoder: store.glorot(format!("attr.encoder.{name}"), 2 * g.attributes(t).cols(), h, rng),
                projection: store.glorot(format!("attr.projection.{name}"), h, h, rng),
            })
            .collect();
        let bilinear = store.glorot("attr.bilinear", h, h, rng);
        let target = g.target_type();
        let others: Vec<usize> = (0..g.node_types().len()).filter(|&t| t != target).collect();
        let semantic = SemanticAttention::new(store, "attr.semantic", h, h, others.len() + 1, cfg.activations.semantic, rng);
        let output = store.glorot("attr.output", h, cfg.output_dim, rng);
        let hetero_thresholds = others.iter().map(|&t| cfg.epsilon_r.get(&g.node_types()[t])).collect();
        Self { types, bilinear, semantic, output, target, others, hetero_thresholds, activations: cfg.activations }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut out: Vec<ParamId> = self.types.iter().flat_map(|t| [t.encoder, t.projection]).collect();
        out.push(self.bilinear);
        out.extend(self.semantic.params());
        out.push(self.output);
        out
    }

    /// Runs the view. With `fixed_edges`, heterogeneous edges are taken as
    /// given instead of regenerated.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &AttrInputs,
        fixed_edges: Option<&HeteroEdges>,
    ) -> Result<AttrForward> {
        let act = self.activations;
        let mut hidden = Vec::with_capacity(self.types.len());
        let mut projected = Vec::with_capacity(self.types.len());
        for (t, p) in self.types.iter().enumerate() {
            let x = tape.constant(inputs.attributes[t].clone());
            let h = sage_encode(tape, &inputs.graphs[t], x, vars[p.encoder.index()], act.encoder)?;
            projected.push(tape.matmul(h, vars[p.projection.index()])?);
            hidden.push(h);
        }
        let edges: HeteroEdges = match fixed_edges {
            Some(e) => e.clone(),
            None => self
                .others
                .iter()
                .zip(&self.hetero_thresholds)
                .map(|(&f, &eps)| threshold_pairs(tape.value(projected[self.target]), tape.value(projected[f]), eps))
                .collect(),
        };
        let query = tape.matmul(projected[self.target], vars[self.bilinear.index()])?;
        let mut groups = vec![hidden[self.target]];
        let mut alphas = Vec::with_capacity(self.others.len());
        let mut isolated = Vec::with_capacity(self.others.len());
        for (&f, e) in self.others.iter().zip(&edges) {
            let agg = hetero_attention_aggregate(tape, query, projected[f], e, act.hetero_score, act.aggregate)?;
            groups.push(agg.z);
            alphas.push(agg.alpha);
            isolated.push(agg.isolated);
        }
        let fused = self.semantic.fuse(tape, vars, &groups)?;
        let z = tape.matmul(fused.output, vars[self.output.index()])?;
        Ok(AttrForward { z, beta: fused.weights, alphas, edges, isolated })
    }
}
