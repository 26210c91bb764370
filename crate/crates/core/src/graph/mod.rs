//! Heterogeneous graph data model.
//!
//! A [`HeteroGraph`] holds typed nodes with one dense attribute matrix per
//! type, directed typed relations between node types, one designated target
//! type, optional class labels on the target type and the meta-paths used
//! by the topology view. Graphs are validated on construction and immutable
//! afterwards; perturbations return new graphs.

mod io;
mod metapath;
mod perturb;
mod stats;

pub use io::{load_graph, save_graph, Schema};
pub use metapath::{meta_path_neighbors, MetaPathAdjacency};
pub use perturb::{mask_attributes, perturb_edges};
pub use stats::{density, render_statistics_table, truncate_decimals, GraphStats};

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: missing file")]
    MissingFile { path: PathBuf },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { path: PathBuf, line: u64, expected: usize, found: usize },
    #[error("{path}:{line}: index out of range: {index} >= {count} nodes of type {node_type}")]
    IndexOutOfRange { path: PathBuf, line: u64, index: usize, count: usize, node_type: String },
    #[error("{path}:{line}: non-finite attribute in column {column}")]
    NonFiniteAttribute { path: PathBuf, line: u64, column: usize },
    #[error("{path}: invalid schema: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("meta-path {name}: {message}")]
    MetaPath { name: String, message: String },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// A directed typed edge set between two node types.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub edges: Vec<(usize, usize)>,
}

/// A composite relation `F₁ -R₁-> F₂ … -Rₗ-> Fₗ₊₁` starting and ending at
/// the target type. Each relation may be traversed in either direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub name: String,
    pub node_types: Vec<String>,
    pub relations: Vec<String>,
}

/// One resolved meta-path hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Hop {
    pub relation: usize,
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    node_types: Vec<String>,
    attributes: Vec<Matrix>,
    relations: Vec<Relation>,
    target_type: usize,
    labels: Option<Vec<usize>>,
    meta_paths: Vec<MetaPath>,
}

impl HeteroGraph {
    /// Validates and assembles a graph. `attributes[k]` has one row per node
    /// of `node_types[k]`; zero-width matrices are allowed.
    pub fn new(
        node_types: Vec<String>,
        attributes: Vec<Matrix>,
        relations: Vec<Relation>,
        target_type: &str,
        labels: Option<Vec<usize>>,
        meta_paths: Vec<MetaPath>,
    ) -> Result<Self> {
        let invalid = |m: String| Err(GraphError::Invalid(m));
        if node_types.len() != attributes.len() {
            return invalid(format!("{} node types but {} attribute matrices", node_types.len(), attributes.len()));
        }
        for (i, t) in node_types.iter().enumerate() {
            if node_types[..i].contains(t) {
                return invalid(format!("duplicate node type {t}"));
            }
        }
        if node_types.len() + relations.len() < 2 {
            return invalid("a heterogeneous graph needs |node types| + |relations| >= 2".into());
        }
        let Some(target) = node_types.iter().position(|t| t == target_type) else {
            return invalid(format!("unknown target type {target_type}"));
        };
        for (t, x) in node_types.iter().zip(&attributes) {
            if !x.is_finite() {
                return invalid(format!("attributes of type {t} contain NaN/Inf"));
            }
        }
        for (i, r) in relations.iter().enumerate() {
            if relations[..i].iter().any(|o| o.name == r.name) {
                return invalid(format!("duplicate relation {}", r.name));
            }
            if r.source >= node_types.len() || r.target >= node_types.len() {
                return invalid(format!("relation {} references an unknown node type", r.name));
            }
            let (ns, nt) = (attributes[r.source].rows(), attributes[r.target].rows());
            if let Some(&(s, d)) = r.edges.iter().find(|&&(s, d)| s >= ns || d >= nt) {
                return invalid(format!("relation {}: edge ({s}, {d}) index out of range", r.name));
            }
        }
        if let Some(l) = &labels {
            if l.len() != attributes[target].rows() {
                return invalid(format!(
                    "{} labels for {} nodes of target type {target_type}",
                    l.len(),
                    attributes[target].rows()
                ));
            }
        }
        let g = Self { node_types, attributes, relations, target_type: target, labels, meta_paths };
        for m in &g.meta_paths {
            g.resolve_meta_path(m)?;
        }
        Ok(g)
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn node_count(&self, ty: usize) -> usize {
        self.attributes[ty].rows()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.attributes.iter().map(Matrix::rows).collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.attributes.iter().map(Matrix::rows).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.relations.iter().map(|r| r.edges.len()).sum()
    }

    pub fn attributes(&self, ty: usize) -> &Matrix {
        &self.attributes[ty]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn target_type(&self) -> usize {
        self.target_type
    }

    pub fn target_name(&self) -> &str {
        &self.node_types[self.target_type]
    }

    pub fn target_count(&self) -> usize {
        self.node_count(self.target_type)
    }

    pub fn target_attributes(&self) -> &Matrix {
        &self.attributes[self.target_type]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().max().map_or(0, |m| m + 1))
    }

    pub fn meta_paths(&self) -> &[MetaPath] {
        &self.meta_paths
    }

    /// Copy with a different meta-path list (validated).
    pub fn with_meta_paths(&self, meta_paths: Vec<MetaPath>) -> Result<Self> {
        let g = Self { meta_paths, ..self.clone() };
        for m in &g.meta_paths {
            g.resolve_meta_path(m)?;
        }
        Ok(g)
    }

    pub(crate) fn with_parts(&self, attributes: Vec<Matrix>, relations: Vec<Relation>) -> Self {
        Self { attributes, relations, ..self.clone() }
    }

    /// Checks `m` against the schema and returns its hops.
    pub(crate) fn resolve_meta_path(&self, m: &MetaPath) -> Result<Vec<Hop>> {
        let err = |message: String| Err(GraphError::MetaPath { name: m.name.clone(), message });
        if m.relations.is_empty() {
            return err("needs at least one relation".into());
        }
        if m.node_types.len() != m.relations.len() + 1 {
            return err(format!("{} node types for {} relations", m.node_types.len(), m.relations.len()));
        }
        let mut types = Vec::with_capacity(m.node_types.len());
        for t in &m.node_types {
            match self.type_index(t) {
                Some(i) => types.push(i),
                None => return err(format!("unknown node type {t}")),
            }
        }
        if types[0] != self.target_type || *types.last().unwrap() != self.target_type {
            return err(format!("must start and end at target type {}", self.target_name()));
        }
        let mut hops = Vec::with_capacity(m.relations.len());
        for (k, rname) in m.relations.iter().enumerate() {
            let Some(ri) = self.relation_index(rname) else {
                return err(format!("unknown relation {rname}"));
            };
            let r = &self.relations[ri];
            let (from, to) = (types[k], types[k + 1]);
            let hop = if r.source == from && r.target == to {
                Hop { relation: ri, reversed: false }
            } else if r.source == to && r.target == from {
                Hop { relation: ri, reversed: true }
            } else {
                return err(format!(
                    "relation {rname} does not connect {} and {}",
                    self.node_types[from], self.node_types[to]
                ));
            };
            hops.push(hop);
        }
        Ok(hops)
    }

    pub fn stats(&self, name: &str) -> GraphStats {
        GraphStats {
            name: name.to_string(),
            node_counts: self.node_types.iter().cloned().zip(self.node_counts()).collect(),
            relation_counts: self.relations.iter().map(|r| (r.name.clone(), r.edges.len())).collect(),
            meta_paths: self.meta_paths.iter().map(|m| m.name.clone()).collect(),
        }
    }
}
