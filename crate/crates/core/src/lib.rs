//! Heterogeneous graph contrastive learning.
//!
//! Two encoders embed the target node type of a [`HeteroGraph`]: an
//! attribute-guided view over graphs regenerated from attribute similarity
//! ([`attr_view`]) and a topology-guided view over meta-path neighbourhoods
//! ([`topo_view`]). Training ([`trainer`]) contrasts the views with positive
//! samples chosen jointly by attribute similarity and meta-path correlation
//! ([`contrast`]). [`eval`] holds the downstream protocols.
//!
//! Everything runs on the small reverse-mode engine in [`autodiff`] over
//! dense `f64` matrices.

pub mod attr_view;
pub mod autodiff;
pub mod config;
pub mod contrast;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod rng;
pub mod semantic;
pub mod topo_view;
pub mod trainer;

pub use autodiff::{Activation, AutodiffError, ParamStore, Tape, Var};
pub use config::{ConfigError, SamplingMode, Threshold, TrainConfig, ViewMode, ZeroNormRows};
pub use contrast::{ContrastError, SampleSets};
pub use eval::{EvalError, EvalReport, SuiteError, SyntheticSpec};
pub use graph::{GraphError, GraphStats, HeteroGraph, MetaPath, MetaPathAdjacency, Relation};
pub use matrix::Matrix;
pub use trainer::{TrainError, TrainedModel};
