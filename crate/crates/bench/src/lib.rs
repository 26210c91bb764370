//! Shared fixtures for the criterion benchmarks.

use hgcl_core::eval::generate_synthetic;
use hgcl_core::{HeteroGraph, SyntheticSpec, TrainConfig};

/// The synthetic benchmark with `per_class` target nodes per class.
pub fn graph(per_class: usize) -> HeteroGraph {
    generate_synthetic(&SyntheticSpec { per_class, ..SyntheticSpec::benchmark() }).expect("benchmark spec is valid")
}

/// Default hyperparameters with a fixed epoch budget and no early stop.
pub fn config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, patience: 0, ..TrainConfig::default() }
}
