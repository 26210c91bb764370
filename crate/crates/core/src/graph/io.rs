//! Dataset directories.
//!
//! ```text
//! schema.json           node types, relations, target type, meta-paths
//! nodes_<type>.csv      index[,label],f0,f1,...
//! edges_<relation>.csv  source,target
//! ```
//!
//! All files are UTF-8 CSV with a header row and 0-based indices. A node
//! file has a `label` column when its second header field is `label`.

use super::{GraphError, HeteroGraph, MetaPath, Relation, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub name: Option<String>,
    pub node_types: Vec<String>,
    pub target_type: String,
    pub relations: Vec<RelationSchema>,
    #[serde(default)]
    pub meta_paths: Vec<MetaPath>,
}

impl Schema {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("schema.json");
        let text = read_file(&path)?;
        serde_json::from_str(&text).map_err(|e| GraphError::Schema { path, message: e.to_string() })
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            GraphError::MissingFile { path: path.into() }
        } else {
            GraphError::Io { path: path.into(), source }
        }
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::io::Cursor<String>>> {
    let text = read_file(path)?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(std::io::Cursor::new(text)))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> GraphError {
    GraphError::Malformed { path: path.into(), line, message: message.into() }
}

fn csv_error(path: &Path, e: csv::Error) -> GraphError {
    let line = e.position().map_or(0, |p| p.line());
    malformed(path, line, e.to_string())
}

struct NodeFile {
    attributes: Matrix,
    labels: Option<Vec<usize>>,
}

fn read_nodes(path: &Path) -> Result<NodeFile> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(malformed(path, 1, "empty header"));
    }
    let has_label = headers.get(1) == Some("label");
    let skip = if has_label { 2 } else { 1 };
    let dim = headers.len().saturating_sub(skip);

    let mut rows: Vec<Option<(Vec<f64>, Option<usize>)>> = Vec::new();
    let mut count = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => GraphError::DimensionMismatch {
                path: path.into(),
                line: pos.as_ref().map_or(0, |p| p.line()),
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => csv_error(path, e),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let index: usize = rec[0].parse().map_err(|_| malformed(path, line, format!("bad node index {:?}", &rec[0])))?;
        let label = if has_label {
            let raw = &rec[1];
            if raw.is_empty() {
                None
            } else {
                Some(raw.parse::<usize>().map_err(|_| malformed(path, line, format!("bad label {raw:?}")))?)
            }
        } else {
            None
        };
        let mut feats = Vec::with_capacity(dim);
        for (c, field) in rec.iter().skip(skip).enumerate() {
            let v: f64 = field.parse().map_err(|_| malformed(path, line, format!("bad attribute {field:?}")))?;
            if !v.is_finite() {
                return Err(GraphError::NonFiniteAttribute { path: path.into(), line, column: c });
            }
            feats.push(v);
        }
        if index >= rows.len() {
            rows.resize(index + 1, None);
        }
        if rows[index].is_some() {
            return Err(malformed(path, line, format!("duplicate node index {index}")));
        }
        rows[index] = Some((feats, label));
        count += 1;
    }
    if count != rows.len() {
        let missing = rows.iter().position(Option::is_none).unwrap_or(0);
        return Err(malformed(path, 0, format!("node indices are not contiguous: {missing} is missing")));
    }
    let n = rows.len();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (feats, label) in rows.into_iter().flatten() {
        data.extend(feats);
        labels.push(label);
    }
    let labels = if has_label && labels.iter().any(Option::is_some) {
        if let Some(i) = labels.iter().position(Option::is_none) {
            return Err(malformed(path, 0, format!("node {i} has no label while others do")));
        }
        Some(labels.into_iter().map(Option::unwrap).collect())
    } else {
        None
    };
    Ok(NodeFile { attributes: Matrix::from_vec(n, dim, data), labels })
}

fn read_edges(path: &Path, counts: (usize, usize), types: (&str, &str)) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv_reader(path)?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(GraphError::DimensionMismatch { path: path.into(), line, expected: 2, found: rec.len() });
        }
        let mut ends = [0usize; 2];
        for k in 0..2 {
            ends[k] = rec[k].parse().map_err(|_| malformed(path, line, format!("bad node index {:?}", &rec[k])))?;
            let (count, ty) = if k == 0 { (counts.0, types.0) } else { (counts.1, types.1) };
            if ends[k] >= count {
                return Err(GraphError::IndexOutOfRange {
                    path: path.into(),
                    line,
                    index: ends[k],
                    count,
                    node_type: ty.to_string(),
                });
            }
        }
        edges.push((ends[0], ends[1]));
    }
    Ok(edges)
}

fn node_file(dir: &Path, ty: &str) -> PathBuf {
    dir.join(format!("nodes_{ty}.csv"))
}

fn edge_file(dir: &Path, rel: &str) -> PathBuf {
    dir.join(format!("edges_{rel}.csv"))
}

/// Reads and validates a dataset directory.
pub fn load_graph(dir: &Path) -> Result<HeteroGraph> {
    let schema = Schema::read(dir)?;
    let schema_path = dir.join("schema.json");
    let schema_err = |message: String| GraphError::Schema { path: schema_path.clone(), message };

    let mut attributes = Vec::with_capacity(schema.node_types.len());
    let mut labels = None;
    for ty in &schema.node_types {
        let f = read_nodes(&node_file(dir, ty))?;
        if *ty == schema.target_type {
            labels = f.labels;
        }
        attributes.push(f.attributes);
    }
    let mut relations = Vec::with_capacity(schema.relations.len());
    for r in &schema.relations {
        let idx = |t: &str| {
            schema.node_types.iter().position(|x| x == t).ok_or_else(|| schema_err(format!("relation {} uses unknown type {t}", r.name)))
        };
        let (s, t) = (idx(&r.source)?, idx(&r.target)?);
        let edges = read_edges(
            &edge_file(dir, &r.name),
            (attributes[s].rows(), attributes[t].rows()),
            (&r.source, &r.target),
        )?;
        relations.push(Relation { name: r.name.clone(), source: s, target: t, edges });
    }
    HeteroGraph::new(schema.node_types.clone(), attributes, relations, &schema.target_type, labels, schema.meta_paths.clone())
}

/// Writes `g` in the format read by [`load_graph`]. Floats are written in
/// shortest round-trip form, so a reload is bit-exact.
pub fn save_graph(g: &HeteroGraph, dir: &Path, name: Option<&str>) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let schema = Schema {
        name: name.map(str::to_string),
        node_types: g.node_types().to_vec(),
        target_type: g.target_name().to_string(),
        relations: g
            .relations()
            .iter()
            .map(|r| RelationSchema {
                name: r.name.clone(),
                source: g.node_types()[r.source].clone(),
                target: g.node_types()[r.target].clone(),
            })
            .collect(),
        meta_paths: g.meta_paths().to_vec(),
    };
    let schema_path = dir.join("schema.json");
    let json = serde_json::to_string_pretty(&schema).expect("schema serializes");
    fs::write(&schema_path, json + "\n").map_err(io_err(&schema_path))?;

    for (t, ty) in g.node_types().iter().enumerate() {
        let x = g.attributes(t);
        let labels = if t == g.target_type() { g.labels() } else { None };
        let mut out = String::from("index");
        if labels.is_some() {
            out.push_str(",label");
        }
        for c in 0..x.cols() {
            out.push_str(&format!(",f{c}"));
        }
        out.push('\n');
        for (i, row) in x.row_iter().enumerate() {
            out.push_str(&i.to_string());
            if let Some(l) = labels {
                out.push_str(&format!(",{}", l[i]));
            }
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        let path = node_file(dir, ty);
        fs::write(&path, out).map_err(io_err(&path))?;
    }
    for r in g.relations() {
        let mut out = String::from("source,target\n");
        for (s, d) in &r.edges {
            out.push_str(&format!("{s},{d}\n"));
        }
        let path = edge_file(dir, &r.name);
        fs::write(&path, out).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::author_chain;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn minimal(dir: &Path) {
        write(
            dir,
            "schema.json",
            r#"{"node_types":["A","P"],"target_type":"A","relations":[{"name":"A-P","source":"A","target":"P"}],
               "meta_paths":[{"name":"APA","node_types":["A","P","A"],"relations":["A-P","A-P"]}]}"#,
        );
        write(dir, "nodes_A.csv", "index,label,f0,f1\n0,0,1.0,0.0\n1,1,0.5,0.5\n");
        write(dir, "nodes_P.csv", "index,f0\n0,2.0\n");
        write(dir, "edges_A-P.csv", "source,target\n0,0\n1,0\n");
    }

    #[test]
    fn loads_minimal_dataset() {
        let d = tempfile::tempdir().unwrap();
        minimal(d.path());
        let g = load_graph(d.path()).unwrap();
        assert_eq!(g.node_counts(), vec![2, 1]);
        assert_eq!(g.labels(), Some(&[0, 1][..]));
        assert_eq!(g.relations()[0].edges, vec![(0, 0), (1, 0)]);
        assert_eq!(g.meta_paths().len(), 1);
    }

    #[test]
    fn out_of_range_index_names_file_and_line() {
        let d = tempfile::tempdir().unwrap();
        minimal(d.path());
        write(d.path(), "edges_A-P.csv", "source,target\n0,0\n5,0\n");
        let err = load_graph(d.path()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, GraphError::IndexOutOfRange { line: 3, index: 5, count: 2, .. }), "{msg}");
        assert!(msg.contains("edges_A-P.csv:3") && msg.contains("index out of range"), "{msg}");
    }

    #[test]
    fn missing_file() {
        let d = tempfile::tempdir().unwrap();
        minimal(d.path());
        fs::remove_file(d.path().join("nodes_P.csv")).unwrap();
        assert!(matches!(load_graph(d.path()), Err(GraphError::MissingFile { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let d = tempfile::tempdir().unwrap();
        minimal(d.path());
        write(d.path(), "nodes_A.csv", "index,label,f0,f1\n0,0,1.0,0.0\n1,1,0.5\n");
        let err = load_graph(d.path()).unwrap_err();
        assert!(matches!(err, GraphError::DimensionMismatch { line: 3, expected: 4, found: 3, .. }), "{err}");
    }

    #[test]
    fn nan_attribute() {
        let d = tempfile::tempdir().unwrap();
        minimal(d.path());
        write(d.path(), "nodes_P.csv", "index,f0\n0,NaN\n");
        let err = load_graph(d.path()).unwrap_err();
        assert!(matches!(err, GraphError::NonFiniteAttribute { line: 2, column: 0, .. }), "{err}");
    }

    #[test]
    fn save_load_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let g = author_chain();
        save_graph(&g, d.path(), Some("chain")).unwrap();
        assert_eq!(load_graph(d.path()).unwrap(), g);
    }
}
