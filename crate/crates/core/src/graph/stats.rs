use super::{GraphError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::Path;

/// Node, edge and meta-path counts of a dataset, as listed in a dataset
/// statistics table. Can be computed from a graph or read from a JSON file
/// when only the counts are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub name: String,
    pub node_counts: Vec<(String, usize)>,
    pub relation_counts: Vec<(String, usize)>,
    #[serde(default)]
    pub meta_paths: Vec<String>,
}

impl GraphStats {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| GraphError::Schema { path: path.into(), message: e.to_string() })
    }

    pub fn total_nodes(&self) -> usize {
        self.node_counts.iter().map(|(_, n)| n).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.relation_counts.iter().map(|(_, n)| n).sum()
    }

    pub fn density(&self) -> f64 {
        density(self.total_edges(), self.total_nodes())
    }
}

/// `|E| / |V|²`; zero for an empty graph.
pub fn density(edges: usize, nodes: usize) -> f64 {
    if nodes == 0 {
        return 0.0;
    }
    edges as f64 / (nodes as f64 * nodes as f64)
}

/// Truncates (not rounds) toward zero at `places` decimals; the published
/// statistics tables list densities this way.
pub fn truncate_decimals(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    // Nudge by a few ulps so exact decimals like 0.00235 don't truncate down.
    (x * s * (1.0 + 4.0 * f64::EPSILON)).trunc() / s
}

/// Renders `Dataset | Nodes | Edges | Meta-paths | Density` with one line
/// per node type / relation / meta-path inside each dataset block.
pub fn render_statistics_table(stats: &[GraphStats]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} | {:<18} | {:<14} | {:<10} | Density", "Dataset", "Nodes", "Edges", "Meta-paths");
    let _ = writeln!(out, "{}", "-".repeat(72));
    for s in stats {
        let lines = s.node_counts.len().max(s.relation_counts.len()).max(s.meta_paths.len()).max(1);
        for k in 0..lines {
            let name = if k == 0 { s.name.as_str() } else { "" };
            let node = s.node_counts.get(k).map(|(t, n)| format!("{t}:{n}")).unwrap_or_default();
            let edge = s.relation_counts.get(k).map(|(r, n)| format!("{r}:{n}")).unwrap_or_default();
            let mp = s.meta_paths.get(k).cloned().unwrap_or_default();
            let dens = if k == 0 { format!("{:.5}", truncate_decimals(s.density(), 5)) } else { String::new() };
            let _ = writeln!(out, "{name:<10} | {node:<18} | {edge:<14} | {mp:<10} | {dens}");
        }
        let _ = writeln!(out, "{}", "-".repeat(72));
    }
    out
}
