//! Positive/negative sample selection and the reciprocal contrastive loss.
//!
//! A pair `(i, j)`, `j ≠ i`, is positive when the raw attribute similarity
//! `s_ij ≥ ε_a` and the meta-path correlation `T_i(j) ≥ ε_t`; every other
//! pair is negative. For one direction of the loss, with
//! `⟨a, b⟩ = cos(a, b) / τ`,
//!
//! ```text
//! ψ(Z, Z') = mean_i −log  Σ_{j∈P(i)} e^⟨z_i,z_j⟩ + Σ_{j∈P(i)∪{i}} e^⟨z_i,z'_j⟩
//!                         ─────────────────────────────────────────────────
//!                         Σ_{j≠i} e^⟨z_i,z_j⟩   + Σ_{j}          e^⟨z_i,z'_j⟩
//! ```
//!
//! The cross-view self term sits in both numerator and denominator and the
//! intra-view self term in neither, so the ratio is at most 1 and the loss
//! is nonnegative.

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::config::ZeroNormRows;
use crate::graph::MetaPathAdjacency;
use crate::matrix::{norm, Matrix};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ContrastError {
    #[error("embedding row {row} has zero norm; cosine similarity is undefined (zero_norm_rows = \"tolerate\" keeps such rows at zero)")]
    ZeroNorm { row: usize },
    #[error("{0} rows in one view but {1} in the other")]
    RowMismatch(usize, usize),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// `T_i(j) = Σ_p δ_p · [j ∈ N_i^p]`.
pub fn topological_correlation(i: usize, j: usize, delta: &[f64], adjacencies: &[MetaPathAdjacency]) -> f64 {
    delta.iter().zip(adjacencies).filter(|(_, adj)| adj.contains(i, j)).map(|(d, _)| d).sum()
}

/// Dense `n × n` matrix of [`topological_correlation`] values.
pub fn correlation_matrix(delta: &[f64], adjacencies: &[MetaPathAdjacency], n: usize) -> Matrix {
    assert_eq!(delta.len(), adjacencies.len(), "one weight per meta-path");
    let mut out = Matrix::zeros(n, n);
    for (&d, adj) in delta.iter().zip(adjacencies) {
        for i in 0..n {
            for &j in adj.neighbors(i) {
                let v = out.get(i, j) + d;
                out.set(i, j, v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSets {
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
    /// Attribute similarity the selection was based on.
    pub similarity: Matrix,
    /// Topological correlation the selection was based on.
    pub correlation: Matrix,
}

/// `P(i) = { j ≠ i : s_ij ≥ ε_a ∧ T_i(j) ≥ ε_t }`, `N(i)` its complement
/// among `j ≠ i`. Both lists are sorted.
pub fn select_samples(similarity: Matrix, correlation: Matrix, epsilon_a: f64, epsilon_t: f64) -> SampleSets {
    let n = similarity.rows();
    assert_eq!(similarity.shape(), (n, n), "square similarity");
    assert_eq!(correlation.shape(), (n, n), "square correlation");
    let (positives, negatives) = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut p, mut q) = (Vec::new(), Vec::new());
            for j in (0..n).filter(|&j| j != i) {
                if similarity.get(i, j) >= epsilon_a && correlation.get(i, j) >= epsilon_t {
                    p.push(j);
                } else {
                    q.push(j);
                }
            }
            (p, q)
        })
        .unzip();
    SampleSets { positives, negatives, similarity, correlation }
}

/// Constant 0/1 masks used by the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMasks {
    positive: Matrix,
    positive_or_self: Matrix,
    off_diagonal: Matrix,
}

impl LossMasks {
    pub fn num_nodes(&self) -> usize {
        self.positive.rows()
    }
}

impl SampleSets {
    pub fn num_nodes(&self) -> usize {
        self.positives.len()
    }

    pub fn masks(&self) -> LossMasks {
        let n = self.num_nodes();
        let mut positive = Matrix::zeros(n, n);
        for (i, p) in self.positives.iter().enumerate() {
            for &j in p {
                positive.set(i, j, 1.0);
            }
        }
        let mut positive_or_self = positive.clone();
        let mut off_diagonal = Matrix::filled(n, n, 1.0);
        for i in 0..n {
            positive_or_self.set(i, i, 1.0);
            off_diagonal.set(i, i, 0.0);
        }
        LossMasks { positive, positive_or_self, off_diagonal }
    }

    pub fn mean_positives(&self) -> f64 {
        if self.positives.is_empty() {
            return 0.0;
        }
        self.positives.iter().map(Vec::len).sum::<usize>() as f64 / self.positives.len() as f64
    }

    /// Diagnostic CSV: `node,positives,negatives` counts.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "node,positives,negatives")?;
        for (i, (p, q)) in self.positives.iter().zip(&self.negatives).enumerate() {
            writeln!(f, "{i},{},{}", p.len(), q.len())?;
        }
        f.flush()
    }
}

fn check_rows(tape: &Tape, z: Var) -> Result<(), ContrastError> {
    match tape.value(z).row_iter().position(|r| norm(r) == 0.0) {
        Some(row) => Err(ContrastError::ZeroNorm { row }),
        None => Ok(()),
    }
}

/// Loss terms from already row-normalised embeddings.
fn psi_normalized(tape: &mut Tape, zn: Var, zn_other: Var, masks: &LossMasks, tau: f64) -> Result<Var, AutodiffError> {
    let pos = tape.constant(masks.positive.clone());
    let pos_self = tape.constant(masks.positive_or_self.clone());
    let off = tape.constant(masks.off_diagonal.clone());

    let intra = tape.matmul_nt(zn, zn)?;
    let intra = tape.scale(intra, 1.0 / tau)?;
    let intra = tape.exp(intra)?;
    let cross = tape.matmul_nt(zn, zn_other)?;
    let cross = tape.scale(cross, 1.0 / tau)?;
    let cross = tape.exp(cross)?;

    let num_intra = tape.mul(intra, pos)?;
    let num_intra = tape.sum_rows(num_intra)?;
    let num_cross = tape.mul(cross, pos_self)?;
    let num_cross = tape.sum_rows(num_cross)?;
    let numerator = tape.add(num_intra, num_cross)?;

    let den_intra = tape.mul(intra, off)?;
    let den_intra = tape.sum_rows(den_intra)?;
    let den_cross = tape.sum_rows(cross)?;
    let denominator = tape.add(den_intra, den_cross)?;

    let log_num = tape.log(numerator)?;
    let log_den = tape.log(denominator)?;
    let per_node = tape.sub(log_den, log_num)?;
    tape.mean_all(per_node)
}

fn normalized_pair(
    tape: &mut Tape,
    z: Var,
    z_other: Var,
    masks: &LossMasks,
    zero_rows: ZeroNormRows,
) -> Result<(Var, Var), ContrastError> {
    let (n, m) = (tape.shape(z).0, tape.shape(z_other).0);
    if n != m {
        return Err(ContrastError::RowMismatch(n, m));
    }
    if n != masks.num_nodes() {
        return Err(ContrastError::RowMismatch(n, masks.num_nodes()));
    }
    if zero_rows == ZeroNormRows::Reject {
        check_rows(tape, z)?;
        check_rows(tape, z_other)?;
    }
    Ok((tape.l2_normalize_rows(z)?, tape.l2_normalize_rows(z_other)?))
}

/// One direction of the loss, `ψ(Z, Z′)`.
pub fn view_contrastive_loss(tape: &mut Tape, z: Var, z_other: Var, masks: &LossMasks, tau: f64) -> Result<Var, ContrastError> {
    view_contrastive_loss_with(tape, z, z_other, masks, tau, ZeroNormRows::Reject)
}

pub fn view_contrastive_loss_with(
    tape: &mut Tape,
    z: Var,
    z_other: Var,
    masks: &LossMasks,
    tau: f64,
    zero_rows: ZeroNormRows,
) -> Result<Var, ContrastError> {
    let (zn, zon) = normalized_pair(tape, z, z_other, masks, zero_rows)?;
    Ok(psi_normalized(tape, zn, zon, masks, tau)?)
}

/// `λ·ψ(Z_topo, Z_attr) + (1−λ)·ψ(Z_attr, Z_topo)`.
pub fn final_loss(
    tape: &mut Tape,
    z_topo: Var,
    z_attr: Var,
    masks: &LossMasks,
    tau: f64,
    lambda: f64,
) -> Result<Var, ContrastError> {
    final_loss_with(tape, z_topo, z_attr, masks, tau, lambda, ZeroNormRows::Reject)
}

pub fn final_loss_with(
    tape: &mut Tape,
    z_topo: Var,
    z_attr: Var,
    masks: &LossMasks,
    tau: f64,
    lambda: f64,
    zero_rows: ZeroNormRows,
) -> Result<Var, ContrastError> {
    let (tn, an) = normalized_pair(tape, z_topo, z_attr, masks, zero_rows)?;
    let a = psi_normalized(tape, tn, an, masks, tau)?;
    let b = psi_normalized(tape, an, tn, masks, tau)?;
    let a = tape.scale(a, lambda)?;
    let b = tape.scale(b, 1.0 - lambda)?;
    Ok(tape.add(a, b)?)
}
