//! Semantic-level attention: fuses several same-shape representation
//! groups with softmax weights derived from a learned attention vector.
//!
//! For group `g` with rows `z_i`, the score is the mean over rows of
//! `q_gᵀ · σ(W′ z_i + b′)`; the weights are the softmax of the scores and
//! the fused output is `Σ_g weight_g · Z_g`.

use crate::autodiff::{Activation, ParamId, ParamStore, Result, Tape, Var};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct SemanticAttention {
    transform: ParamId,
    bias: ParamId,
    queries: Vec<ParamId>,
    activation: Activation,
}

#[derive(Debug, Clone, Copy)]
pub struct Fused {
    pub output: Var,
    /// `G×1` softmax weights, one per group.
    pub weights: Var,
}

impl SemanticAttention {
    /// `query_count` is 1 for a single shared attention vector, or the
    /// number of groups for one vector per group.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        attention_dim: usize,
        query_count: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let transform = store.glorot(format!("{prefix}.transform"), dim, attention_dim, rng);
        let bias = store.zeros(format!("{prefix}.bias"), 1, attention_dim);
        let queries = (0..query_count).map(|g| store.glorot(format!("{prefix}.query.{g}"), attention_dim, 1, rng)).collect();
        Self { transform, bias, queries, activation }
    }

    /// Wraps existing parameters.
    pub fn from_params(transform: ParamId, bias: ParamId, queries: Vec<ParamId>, activation: Activation) -> Self {
        Self { transform, bias, queries, activation }
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        [self.transform, self.bias].into_iter().chain(self.queries.iter().copied())
    }

    pub fn fuse(&self, tape: &mut Tape, vars: &[Var], groups: &[Var]) -> Result<Fused> {
        assert!(
            self.queries.len() == 1 || self.queries.len() == groups.len(),
            "{} attention vectors for {} groups",
            self.queries.len(),
            groups.len()
        );
        let mut scores = Vec::with_capacity(groups.len());
        for (g, &z) in groups.iter().enumerate() {
            let q = vars[self.queries[if self.queries.len() == 1 { 0 } else { g }].index()];
            let h = tape.matmul(z, vars[self.transform.index()])?;
            let h = tape.add(h, vars[self.bias.index()])?;
            let h = tape.activate(h, self.activation)?;
            let s = tape.matmul(h, q)?;
            scores.push(tape.mean_all(s)?);
        }
        let stacked = tape.concat_rows(&scores)?;
        let weights = tape.segment_softmax(stacked, &[0, groups.len()])?;
        let mut output = None;
        for (g, &z) in groups.iter().enumerate() {
            let w = tape.gather_rows(weights, &[g])?;
            let term = tape.mul(z, w)?;
            output = Some(match output {
                None => term,
                Some(acc) => tape.add(acc, term)?,
            });
        }
        Ok(Fused { output: output.expect("at least one group"), weights })
    }
}
