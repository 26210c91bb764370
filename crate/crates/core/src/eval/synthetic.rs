//! Heterogeneous stochastic block model for desk-scale experiments.
//!
//! Target nodes (type `P`) belong to `classes` equally sized classes. Every
//! auxiliary node is also assigned a class, round-robin. A target node links
//! to an auxiliary node with probability `p_intra` when their classes match
//! and `p_inter` otherwise. Attributes are sparse binary bag-of-words
//! vectors: dimension `j` of a node in class `c` is 1 with probability
//! `signal` when `j mod classes = c` and with probability `noise` otherwise.
//! One meta-path `P-X-P` is declared per auxiliary type `X`.

use crate::graph::{GraphError, HeteroGraph, MetaPath, Relation};
use crate::matrix::Matrix;
use crate::rng::substream;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const TARGET_TYPE: &str = "P";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSpec {
    pub name: String,
    pub count: usize,
    pub dim: usize,
    pub p_intra: f64,
    pub p_inter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub target_dim: usize,
    pub aux: Vec<AuxSpec>,
    /// Activation probability of a node's own class dimensions.
    pub signal: f64,
    /// Activation probability of every other dimension.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The committed benchmark: 3 classes × 150 target nodes, auxiliary
    /// types `A` and `S`, meta-paths `PAP` and `PSP`, moderate noise.
    pub fn benchmark() -> Self {
        Self {
            classes: 3,
            per_class: 150,
            target_dim: 60,
            aux: vec![
                AuxSpec { name: "A".into(), count: 120, dim: 24, p_intra: 0.04, p_inter: 0.01 },
                AuxSpec { name: "S".into(), count: 30, dim: 12, p_intra: 0.12, p_inter: 0.03 },
            ],
            signal: 0.3,
            noise: 0.1,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::Invalid(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.per_class == 0 {
            return bad("per_class must be positive".into());
        }
        for (name, p) in [("signal", self.signal), ("noise", self.noise)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        for a in &self.aux {
            for p in [a.p_intra, a.p_inter] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("edge probability {p} for type {} outside [0, 1]", a.name));
                }
            }
            if a.name == TARGET_TYPE || a.name.is_empty() {
                return bad(format!("invalid auxiliary type name {:?}", a.name));
            }
        }
        Ok(())
    }
}

fn attributes<R: Rng>(classes: &[usize], k: usize, dim: usize, signal: f64, noise: f64, rng: &mut R) -> Matrix {
    let mut x = Matrix::zeros(classes.len(), dim);
    for (i, &c) in classes.iter().enumerate() {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            let p = if j % k == c { signal } else { noise };
            *v = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
        }
    }
    x
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HeteroGraph, GraphError> {
    spec.validate()?;
    let k = spec.classes;
    let n = k * spec.per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / spec.per_class).collect();
    let mut rng = substream(spec.seed, "synthetic");
    let mut node_types = vec![TARGET_TYPE.to_string()];
    let mut attrs = vec![attributes(&labels, k, spec.target_dim, spec.signal, spec.noise, &mut rng)];
    let mut relations = Vec::new();
    let mut meta_paths = Vec::new();
    for (t, a) in spec.aux.iter().enumerate() {
        let aux_classes: Vec<usize> = (0..a.count).map(|i| i % k).collect();
        attrs.push(attributes(&aux_classes, k, a.dim, spec.signal, spec.noise, &mut rng));
        let mut edges = Vec::new();
        for (p, &cp) in labels.iter().enumerate() {
            for (q, &cq) in aux_classes.iter().enumerate() {
                let prob = if cp == cq { a.p_intra } else { a.p_inter };
                if rng.gen::<f64>() < prob {
                    edges.push((p, q));
                }
            }
        }
        let rel = format!("{TARGET_TYPE}-{}", a.name);
        relations.push(Relation { name: rel.clone(), source: 0, target: t + 1, edges });
        meta_paths.push(MetaPath {
            name: format!("{TARGET_TYPE}{}{TARGET_TYPE}", a.name),
            node_types: vec![TARGET_TYPE.into(), a.name.clone(), TARGET_TYPE.into()],
            relations: vec![rel.clone(), rel],
        });
        node_types.push(a.name.clone());
    }
    HeteroGraph::new(node_types, attrs, relations, TARGET_TYPE, Some(labels), meta_paths)
}
