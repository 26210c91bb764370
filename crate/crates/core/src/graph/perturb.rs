use super::{HeteroGraph, Relation};
use crate::matrix::Matrix;
use crate::rng::substream;
use rand::seq::index::sample;
use rand::Rng;

/// Deletes every edge independently with probability `p`. Nodes and
/// attributes are untouched; the result depends only on `(g, p, seed)`.
pub fn perturb_edges(g: &HeteroGraph, p: f64, seed: u64) -> HeteroGraph {
    assert!((0.0..=1.0).contains(&p), "deletion probability {p} outside [0, 1]");
    let mut rng = substream(seed, "perturb-edges");
    let relations = g
        .relations()
        .iter()
        .map(|r| Relation { edges: r.edges.iter().copied().filter(|_| rng.gen::<f64>() >= p).collect(), ..r.clone() })
        .collect();
    let attributes = (0..g.node_types().len()).map(|t| g.attributes(t).clone()).collect();
    g.with_parts(attributes, relations)
}

/// Zeroes `⌊ratio · dim⌋` randomly chosen dimensions of every node's
/// attribute vector, for every node type.
pub fn mask_attributes(g: &HeteroGraph, ratio: f64, seed: u64) -> HeteroGraph {
    assert!((0.0..=1.0).contains(&ratio), "masking ratio {ratio} outside [0, 1]");
    let mut rng = substream(seed, "mask-attributes");
    let attributes = (0..g.node_types().len())
        .map(|t| {
            let mut x: Matrix = g.attributes(t).clone();
            let dim = x.cols();
            let k = (ratio * dim as f64).floor() as usize;
            for r in 0..x.rows() {
                let row = x.row_mut(r);
                for c in sample(&mut rng, dim, k) {
                    row[c] = 0.0;
                }
            }
            x
        })
        .collect();
    g.with_parts(attributes, g.relations().to_vec())
}
