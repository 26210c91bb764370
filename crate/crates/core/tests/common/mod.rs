//! Independent oracles and random instances shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use hgcl_core::attr_view::{AttrInputs, AttrView, HeteroEdges};
use hgcl_core::autodiff::gradcheck::{check_gradients, GradCheck};
use hgcl_core::autodiff::{Activation, ParamStore, Tape, Var};
use hgcl_core::contrast::{final_loss, select_samples, view_contrastive_loss};
use hgcl_core::graph::{meta_path_neighbors, HeteroGraph, MetaPath, Relation};
use hgcl_core::rng::{substream, StageRng};
use hgcl_core::topo_view::TopoView;
use hgcl_core::{Matrix, TrainConfig};
use rand::Rng;
use std::collections::BTreeSet;

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn uniform(rng: &mut StageRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Uniform entries with magnitude at least 0.1, away from activation kinks.
pub fn away_from_zero(rng: &mut StageRng, rows: usize, cols: usize) -> Matrix {
    uniform(rng, rows, cols, -2.0, 2.0).map(|v| if v.abs() < 0.1 { v.signum() * 0.1 + v } else { v })
}

/// A random heterogeneous graph with 2 to 4 node types of at most 50 nodes
/// each, sparse random relations and 1 to 3 meta-paths starting and ending
/// at type `T0`.
pub fn random_graph(seed: u64) -> HeteroGraph {
    random_graph_with(seed, 0.05)
}

/// [`random_graph`] with all-zero attribute rows drawn at rate `zero_rows`.
pub fn random_graph_with(seed: u64, zero_rows: f64) -> HeteroGraph {
    let mut rng = substream(seed, "random-graph");
    let types = rng.gen_range(2..=4);
    let names: Vec<String> = (0..types).map(|t| format!("T{t}")).collect();
    let counts: Vec<usize> = (0..types).map(|_| rng.gen_range(1..=50)).collect();
    let attributes: Vec<Matrix> = counts
        .iter()
        .map(|&n| {
            let dim = rng.gen_range(1..=6);
            let mut x = Matrix::zeros(n, dim);
            for i in 0..n {
                if rng.gen_bool(zero_rows) {
                    continue;
                }
                // Column 0 is always drawn so kept rows are nonzero.
                for (j, v) in x.row_mut(i).iter_mut().enumerate() {
                    *v = if j == 0 || rng.gen_bool(0.7) { rng.gen_range(-1.0..1.0) } else { 0.0 };
                }
            }
            x
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = (1..types).map(|t| (rng.gen_range(0..t), t)).collect();
    for a in 0..types {
        for b in a..types {
            if !pairs.contains(&(a, b)) && rng.gen_bool(0.3) {
                pairs.push((a, b));
            }
        }
    }
    let relations: Vec<Relation> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let (source, target) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            let p = rng.gen_range(0.0..0.12);
            let mut edges = Vec::new();
            for s in 0..counts[source] {
                for d in 0..counts[target] {
                    if rng.gen_bool(p) {
                        edges.push((s, d));
                    }
                }
            }
            if !edges.is_empty() && rng.gen_bool(0.3) {
                edges.push(edges[0]);
            }
            Relation { name: format!("R{k}"), source, target, edges }
        })
        .collect();

    let mut meta_paths = Vec::new();
    for m in 0..rng.gen_range(1..=3) {
        let hops_out = rng.gen_range(1..=2);
        let mut path_types = vec![0usize];
        let mut path_rels = Vec::new();
        for _ in 0..hops_out {
            let cur = *path_types.last().unwrap();
            let incident: Vec<usize> =
                relations.iter().enumerate().filter(|(_, r)| r.source == cur || r.target == cur).map(|(i, _)| i).collect();
            let r = incident[rng.gen_range(0..incident.len())];
            let next = if relations[r].source == cur { relations[r].target } else { relations[r].source };
            path_rels.push(r);
            path_types.push(next);
        }
        let direct_back = relations.iter().position(|r| {
            let cur = *path_types.last().unwrap();
            (r.source == cur && r.target == 0) || (r.target == cur && r.source == 0)
        });
        match direct_back {
            Some(r) if rng.gen_bool(0.3) => {
                path_rels.push(r);
                path_types.push(0);
            }
            _ => {
                let back_types: Vec<usize> = path_types[..path_types.len() - 1].iter().rev().copied().collect();
                let back_rels: Vec<usize> = path_rels.iter().rev().copied().collect();
                path_types.extend(back_types);
                path_rels.extend(back_rels);
            }
        }
        meta_paths.push(MetaPath {
            name: format!("M{m}"),
            node_types: path_types.iter().map(|&t| names[t].clone()).collect(),
            relations: path_rels.iter().map(|&r| relations[r].name.clone()).collect(),
        });
    }
    HeteroGraph::new(names, attributes, relations, "T0", None, meta_paths).expect("random graph is valid")
}

/// Enumerates every path instance of `m` from each target node and collects
/// the end points, plus the node itself.
pub fn oracle_meta_path(g: &HeteroGraph, m: &MetaPath) -> Vec<BTreeSet<usize>> {
    let types: Vec<usize> = m.node_types.iter().map(|t| g.type_index(t).unwrap()).collect();
    let hops: Vec<Vec<Vec<usize>>> = m
        .relations
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let r = &g.relations()[g.relation_index(name).unwrap()];
            let forward = r.source == types[k] && r.target == types[k + 1];
            let mut out = vec![Vec::new(); g.node_count(types[k])];
            for &(s, d) in &r.edges {
                let (a, b) = if forward { (s, d) } else { (d, s) };
                out[a].push(b);
            }
            out
        })
        .collect();
    fn walk(hops: &[Vec<Vec<usize>>], depth: usize, node: usize, ends: &mut BTreeSet<usize>) {
        if depth == hops.len() {
            ends.insert(node);
            return;
        }
        for &next in &hops[depth][node] {
            walk(hops, depth + 1, next, ends);
        }
    }
    (0..g.target_count())
        .map(|i| {
            let mut ends = BTreeSet::from([i]);
            walk(&hops, 0, i, &mut ends);
            ends
        })
        .collect()
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-pair evaluation of the positive/negative rule on raw target
/// attributes and brute-force meta-path neighbourhoods.
pub fn oracle_samples(g: &HeteroGraph, delta: &[f64], eps_a: f64, eps_t: f64) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let neighborhoods: Vec<Vec<BTreeSet<usize>>> = g.meta_paths().iter().map(|m| oracle_meta_path(g, m)).collect();
    let x = g.target_attributes();
    let n = g.target_count();
    let mut pos = vec![Vec::new(); n];
    let mut neg = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = oracle_cosine(x.row(i), x.row(j));
            let mut t = 0.0;
            for (p, nb) in neighborhoods.iter().enumerate() {
                if nb[i].contains(&j) {
                    t += delta[p];
                }
            }
            if s >= eps_a && t >= eps_t {
                pos[i].push(j);
            } else {
                neg[i].push(j);
            }
        }
    }
    (pos, neg)
}

/// The per-view contrastive loss written out as scalar loops.
pub fn oracle_psi(z: &Matrix, zp: &Matrix, positives: &[Vec<usize>], tau: f64) -> f64 {
    let n = z.rows();
    let e = |a: &[f64], b: &[f64]| (oracle_cosine(a, b) / tau).exp();
    let mut total = 0.0;
    for i in 0..n {
        let mut num = e(z.row(i), zp.row(i));
        for &j in &positives[i] {
            num += e(z.row(i), z.row(j)) + e(z.row(i), zp.row(j));
        }
        let mut den = 0.0;
        for j in 0..n {
            if j != i {
                den += e(z.row(i), z.row(j));
            }
            den += e(z.row(i), zp.row(j));
        }
        total += -(num / den).ln();
    }
    total / n as f64
}

pub fn loss_value(z: &Matrix, zp: &Matrix, positives: &[Vec<usize>], tau: f64) -> f64 {
    let n = z.rows();
    let samples = positive_sets(n, positives);
    let mut tape = Tape::new();
    let a = tape.constant(z.clone());
    let b = tape.constant(zp.clone());
    let l = view_contrastive_loss(&mut tape, a, b, &samples.masks(), tau).unwrap();
    tape.value(l).get(0, 0)
}

pub fn final_value(zt: &Matrix, za: &Matrix, positives: &[Vec<usize>], tau: f64, lambda: f64) -> f64 {
    let samples = positive_sets(zt.rows(), positives);
    let mut tape = Tape::new();
    let a = tape.constant(zt.clone());
    let b = tape.constant(za.clone());
    let l = final_loss(&mut tape, a, b, &samples.masks(), tau, lambda).unwrap();
    tape.value(l).get(0, 0)
}

/// Sample sets whose positives are exactly `positives`.
pub fn positive_sets(n: usize, positives: &[Vec<usize>]) -> hgcl_core::SampleSets {
    let mut corr = Matrix::zeros(n, n);
    for (i, p) in positives.iter().enumerate() {
        for &j in p {
            corr.set(i, j, 1.0);
        }
    }
    select_samples(Matrix::filled(n, n, 1.0), corr, 0.0, 1.0)
}

fn weighted_sum(tape: &mut Tape, out: Var, weights: &Matrix) -> hgcl_core::autodiff::Result<Var> {
    let w = tape.constant(weights.clone());
    let p = tape.mul(out, w)?;
    tape.sum_all(p)
}

type OpFn = Box<dyn Fn(&mut Tape, &[Var]) -> hgcl_core::autodiff::Result<Var>>;

/// Random segment layout over `entries` items in `segments` nonempty groups.
fn segments(rng: &mut StageRng, segments: usize, entries: usize) -> Vec<usize> {
    let mut cuts: BTreeSet<usize> = BTreeSet::new();
    while cuts.len() < segments - 1 {
        cuts.insert(rng.gen_range(1..entries));
    }
    std::iter::once(0).chain(cuts).chain(std::iter::once(entries)).collect()
}

/// Finite-difference checks of every differentiable tape operation on
/// random inputs of at most 8×8, each reduced to a scalar by a random
/// weighted sum.
pub fn gradcheck_ops(seed: u64) -> Vec<(String, GradCheck)> {
    let mut rng = substream(seed, "gradcheck-ops");
    let n = rng.gen_range(2..=8);
    let m = rng.gen_range(1..=8);
    let k = rng.gen_range(1..=8);
    let a = away_from_zero(&mut rng, n, m);
    let b = away_from_zero(&mut rng, m, k);
    let c = away_from_zero(&mut rng, n, m);
    let col = away_from_zero(&mut rng, n, 1);
    let rowv = away_from_zero(&mut rng, 1, m);
    let scalar = away_from_zero(&mut rng, 1, 1);
    let positive = uniform(&mut rng, n, m, 0.2, 3.0);
    let w_nm = uniform(&mut rng, n, m, -1.0, 1.0);
    let w_nk = uniform(&mut rng, n, k, -1.0, 1.0);
    let w_nn = uniform(&mut rng, n, n, -1.0, 1.0);
    let w_n2m = uniform(&mut rng, n, 2 * m, -1.0, 1.0);
    let w_2nm = uniform(&mut rng, 2 * n, m, -1.0, 1.0);
    let w_n1 = uniform(&mut rng, n, 1, -1.0, 1.0);

    let gather_idx: Vec<usize> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..n)).collect();
    let w_gather = uniform(&mut rng, gather_idx.len(), m, -1.0, 1.0);
    let seg_count = rng.gen_range(1..=n.min(4));
    let entries = rng.gen_range(seg_count.max(2)..=8);
    let offsets = segments(&mut rng, seg_count, entries);
    let members: Vec<usize> = (0..entries).map(|_| rng.gen_range(0..n)).collect();
    let dst: Vec<usize> = (0..entries).map(|_| rng.gen_range(0..n)).collect();
    let logits = away_from_zero(&mut rng, entries, 1);
    let w_seg = uniform(&mut rng, seg_count, m, -1.0, 1.0);
    let w_seg1 = uniform(&mut rng, entries, 1, -1.0, 1.0);

    let mut cases: Vec<(String, Vec<Matrix>, OpFn)> = Vec::new();
    let add = |cases: &mut Vec<(String, Vec<Matrix>, OpFn)>, name: &str, inputs: Vec<Matrix>, f: OpFn| {
        cases.push((name.to_string(), inputs, f));
    };
    {
        let w = w_nk.clone();
        add(&mut cases, "matmul", vec![a.clone(), b.clone()], Box::new(move |t, v| {
            let o = t.matmul(v[0], v[1])?;
            weighted_sum(t, o, &w)
        }));
    }
    {
        let w = w_nn.clone();
        add(&mut cases, "matmul_nt", vec![a.clone(), c.clone()], Box::new(move |t, v| {
            let o = t.matmul_nt(v[0], v[1])?;
            weighted_sum(t, o, &w)
        }));
    }
    for (label, rhs) in [("same", c.clone()), ("column", col.clone()), ("row", rowv.clone()), ("scalar", scalar.clone())] {
        let w = w_nm.clone();
        add(&mut cases, &format!("add/{label}"), vec![a.clone(), rhs.clone()], Box::new(move |t, v| {
            let o = t.add(v[0], v[1])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_nm.clone();
        add(&mut cases, &format!("mul/{label}"), vec![a.clone(), rhs.clone()], Box::new(move |t, v| {
            let o = t.mul(v[0], v[1])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_nm.clone();
        add(&mut cases, &format!("sub/{label}"), vec![a.clone(), rhs], Box::new(move |t, v| {
            let o = t.sub(v[0], v[1])?;
            weighted_sum(t, o, &w)
        }));
    }
    {
        let w = w_nm.clone();
        add(&mut cases, "scale", vec![a.clone()], Box::new(move |t, v| {
            let o = t.scale(v[0], -1.7)?;
            weighted_sum(t, o, &w)
        }));
    }
    for kind in [Activation::Identity, Activation::Elu, Activation::LeakyRelu, Activation::Tanh, Activation::Sigmoid] {
        let w = w_nm.clone();
        add(&mut cases, &format!("activate/{kind:?}"), vec![a.clone()], Box::new(move |t, v| {
            let o = t.activate(v[0], kind)?;
            weighted_sum(t, o, &w)
        }));
    }
    {
        let w = w_nm.clone();
        add(&mut cases, "exp", vec![a.clone()], Box::new(move |t, v| {
            let o = t.exp(v[0])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_nm.clone();
        add(&mut cases, "log", vec![positive.clone()], Box::new(move |t, v| {
            let o = t.log(v[0])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_nm.clone();
        add(&mut cases, "l2_normalize_rows", vec![a.clone()], Box::new(move |t, v| {
            let o = t.l2_normalize_rows(v[0])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_n2m.clone();
        add(&mut cases, "row_concat", vec![a.clone(), c.clone()], Box::new(move |t, v| {
            let o = t.row_concat(&[v[0], v[1]])?;
            weighted_sum(t, o, &w)
        }));
        let w = w_2nm.clone();
        add(&mut cases, "concat_rows", vec![a.clone(), c.clone()], Box::new(move |t, v| {
            let o = t.concat_rows(&[v[0], v[1]])?;
            weighted_sum(t, o, &w)
        }));
        let (w, idx) = (w_gather.clone(), gather_idx.clone());
        add(&mut cases, "gather_rows", vec![a.clone()], Box::new(move |t, v| {
            let o = t.gather_rows(v[0], &idx)?;
            weighted_sum(t, o, &w)
        }));
        let (w, off, mem) = (w_seg.clone(), offsets.clone(), members.clone());
        add(&mut cases, "masked_mean_rows", vec![a.clone()], Box::new(move |t, v| {
            let o = t.masked_mean_rows(v[0], &off, &mem)?;
            weighted_sum(t, o, &w)
        }));
        let (w, off) = (w_seg1.clone(), offsets.clone());
        add(&mut cases, "segment_softmax", vec![logits.clone()], Box::new(move |t, v| {
            let o = t.segment_softmax(v[0], &off)?;
            weighted_sum(t, o, &w)
        }));
        let (w, off, mem) = (w_seg.clone(), offsets.clone(), members.clone());
        add(&mut cases, "segment_weighted_sum", vec![logits.clone(), a.clone()], Box::new(move |t, v| {
            let o = t.segment_weighted_sum(v[0], v[1], &mem, &off)?;
            weighted_sum(t, o, &w)
        }));
        let (w, src, dst) = (w_seg1.clone(), members.clone(), dst.clone());
        add(&mut cases, "edge_dot", vec![a.clone(), c.clone()], Box::new(move |t, v| {
            let o = t.edge_dot(v[0], v[1], &src, &dst)?;
            weighted_sum(t, o, &w)
        }));
        let w = w_n1.clone();
        add(&mut cases, "sum_rows", vec![a.clone()], Box::new(move |t, v| {
            let o = t.sum_rows(v[0])?;
            weighted_sum(t, o, &w)
        }));
        add(&mut cases, "sum_all", vec![a.clone()], Box::new(|t, v| {
            let sq = t.mul(v[0], v[0])?;
            t.sum_all(sq)
        }));
        add(&mut cases, "mean_all", vec![a.clone()], Box::new(|t, v| {
            let sq = t.mul(v[0], v[0])?;
            t.mean_all(sq)
        }));
    }
    cases
        .into_iter()
        .map(|(name, inputs, f)| {
            let r = check_gradients(&inputs, GRAD_STEP, |t, v| f(t, v)).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, r)
        })
        .collect()
}

fn small_config() -> TrainConfig {
    TrainConfig { hidden_dim: 5, output_dim: 3, ..TrainConfig::default() }
}

/// Gradient checks of the attribute view (with fixed heterogeneous edges),
/// the topology view and the combined loss with respect to every
/// parameter, on a small random graph.
pub fn gradcheck_encoders(seed: u64) -> Vec<(String, GradCheck)> {
    let mut g = random_graph_with(seed, 0.0);
    let mut retry = seed;
    while g.target_count() > 12 || g.target_count() < 3 {
        retry += 1000;
        g = random_graph_with(retry, 0.0);
    }
    let mut rng = substream(seed, "gradcheck-encoders");
    let cfg = small_config();
    let n = g.target_count();
    let others: Vec<usize> = (0..g.node_types().len()).filter(|&t| t != g.target_type()).collect();
    let edges: HeteroEdges = others
        .iter()
        .map(|&t| {
            let mut e: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..g.node_count(t)).map(move |j| (i, j)))
                .filter(|_| rng.gen_bool(0.4))
                .collect();
            e.sort_unstable();
            e
        })
        .collect();
    let inputs = AttrInputs::prepare(&g, &cfg);
    let adjacencies: Vec<_> = g.meta_paths().iter().map(|m| meta_path_neighbors(&g, m).unwrap()).collect();
    let w_out = uniform(&mut rng, n, cfg.output_dim, -1.0, 1.0);

    let mut store = ParamStore::new();
    let attr = AttrView::new(&mut store, &g, &cfg, &mut rng);
    let names: Vec<String> = g.meta_paths().iter().map(|m| m.name.clone()).collect();
    let topo = TopoView::new(&mut store, g.target_attributes().cols(), &names, &cfg, &mut rng);
    // Larger initial scale so every activation sees a spread of inputs.
    let params: Vec<Matrix> = store.values().iter().map(|m| m.map(|v| 2.0 * v + 0.05)).collect();
    let x = g.target_attributes().clone();
    let positives: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i && rng.gen_bool(0.3)).collect()).collect();
    let masks = positive_sets(n, &positives).masks();

    let mut out = Vec::new();
    let r = check_gradients(&params, GRAD_STEP, |t, v| {
        let f = attr.forward(t, v, &inputs, Some(&edges))?;
        weighted_sum(t, f.z, &w_out)
    })
    .unwrap();
    out.push(("attr_view".to_string(), r));
    let r = check_gradients(&params, GRAD_STEP, |t, v| {
        let xv = t.constant(x.clone());
        let f = topo.forward(t, v, xv, &adjacencies)?;
        weighted_sum(t, f.z, &w_out)
    })
    .unwrap();
    out.push(("topo_view".to_string(), r));
    let r = check_gradients(&params, GRAD_STEP, |t, v| {
        let za = attr.forward(t, v, &inputs, Some(&edges))?.z;
        let xv = t.constant(x.clone());
        let zt = topo.forward(t, v, xv, &adjacencies)?.z;
        final_loss(t, zt, za, &masks, 0.4, 0.5).map_err(|e| match e {
            hgcl_core::ContrastError::Autodiff(a) => a,
            other => panic!("{other}"),
        })
    })
    .unwrap();
    out.push(("final_loss".to_string(), r));
    out
}

/// Seeded random thresholds and meta-path weights for the sampling oracle.
/// Only the topology view is enabled so no attribute graphs are built.
pub fn sampling_config(g: &HeteroGraph, seed: u64) -> TrainConfig {
    let mut rng = substream(seed, "sampling-config");
    let mut cfg = TrainConfig { views: hgcl_core::ViewMode::TopologyOnly, ..TrainConfig::default() };
    for m in g.meta_paths() {
        cfg.delta.insert(m.name.clone(), rng.gen_range(0..=5) as f64 * 0.2);
    }
    cfg.epsilon_t = [0.0, 0.5, 1.0, 1.2, 2.0][rng.gen_range(0..5)];
    cfg.epsilon_a = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) };
    cfg
}

/// Compares every meta-path adjacency of `random_graph(seed)` with path
/// enumeration.
pub fn check_meta_paths(seed: u64) -> Result<usize, String> {
    let g = random_graph(seed);
    let mut pairs = 0;
    for m in g.meta_paths() {
        let adj = meta_path_neighbors(&g, m).map_err(|e| e.to_string())?;
        let expected = oracle_meta_path(&g, m);
        for (i, want) in expected.iter().enumerate() {
            let got: Vec<usize> = adj.neighbors(i).to_vec();
            let want: Vec<usize> = want.iter().copied().collect();
            if got != want {
                return Err(format!("seed {seed} path {} node {i}: got {got:?}, expected {want:?}", m.name));
            }
            pairs += want.len();
        }
    }
    Ok(pairs)
}

/// Compares the preprocessed sample sets of `random_graph(seed)` with the
/// per-pair rule and checks that each node's sets partition the others.
pub fn check_sampling(seed: u64) -> Result<usize, String> {
    let g = random_graph(seed);
    let cfg = sampling_config(&g, seed);
    let delta: Vec<f64> = g.meta_paths().iter().map(|m| cfg.delta_for(&m.name)).collect();
    let prep = hgcl_core::trainer::preprocess(&g, &cfg).map_err(|e| e.to_string())?;
    let (pos, neg) = oracle_samples(&g, &delta, cfg.epsilon_a, cfg.epsilon_t);
    let s = &prep.samples;
    for i in 0..g.target_count() {
        if s.positives[i] != pos[i] || s.negatives[i] != neg[i] {
            return Err(format!(
                "seed {seed} node {i}: got P={:?} N={:?}, expected P={:?} N={:?}",
                s.positives[i], s.negatives[i], pos[i], neg[i]
            ));
        }
        let mut union: Vec<usize> = s.positives[i].iter().chain(&s.negatives[i]).copied().collect();
        union.sort_unstable();
        let others: Vec<usize> = (0..g.target_count()).filter(|&j| j != i).collect();
        if union != others {
            return Err(format!("seed {seed} node {i}: P and N do not partition the other nodes"));
        }
    }
    Ok(pos.iter().map(Vec::len).sum())
}

/// A hand-computed loss value on a tiny instance.
pub struct LossFixture {
    pub name: &'static str,
    pub z_topo: Matrix,
    pub z_attr: Matrix,
    pub positives: Vec<Vec<usize>>,
    pub tau: f64,
    /// `None` evaluates one direction `ψ(z_topo, z_attr)`.
    pub lambda: Option<f64>,
    pub expected: f64,
}

impl LossFixture {
    pub fn value(&self) -> f64 {
        match self.lambda {
            Some(l) => final_value(&self.z_topo, &self.z_attr, &self.positives, self.tau, l),
            None => loss_value(&self.z_topo, &self.z_attr, &self.positives, self.tau),
        }
    }
}

/// Values worked out independently in double precision.
pub fn loss_fixtures() -> Vec<LossFixture> {
    let z3 = Matrix::from_rows(&[[1.0, 2.0], [0.5, -1.0], [-1.0, 0.3]]);
    let z3p = Matrix::from_rows(&[[0.2, 1.0], [1.0, 1.0], [-0.5, -0.5]]);
    let p3 = vec![vec![1], vec![0, 2], vec![]];
    let z4 = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, -1.0, 1.0], [3.0, 1.0, 0.0], [-1.0, -1.0, -1.0]]);
    let z4p = Matrix::from_rows(&[[0.5, 0.5, 0.0], [1.0, -2.0, 0.5], [0.0, 0.0, 1.0], [2.0, 1.0, -1.0]]);
    let p4 = vec![vec![2], vec![], vec![0, 3], vec![0, 1, 2]];
    let eye = Matrix::identity(2);
    vec![
        // -ln(e / (e + 2))
        LossFixture {
            name: "2 orthogonal nodes",
            z_topo: eye.clone(),
            z_attr: eye,
            positives: vec![vec![], vec![]],
            tau: 1.0,
            lambda: None,
            expected: 0.5514447139320511,
        },
        LossFixture {
            name: "3 nodes",
            z_topo: z3,
            z_attr: z3p,
            positives: p3,
            tau: 0.5,
            lambda: None,
            expected: 0.2496170613289571,
        },
        LossFixture {
            name: "4 nodes forward",
            z_topo: z4.clone(),
            z_attr: z4p.clone(),
            positives: p4.clone(),
            tau: 0.4,
            lambda: None,
            expected: 0.4009555483581202,
        },
        LossFixture {
            name: "4 nodes reverse",
            z_topo: z4p.clone(),
            z_attr: z4.clone(),
            positives: p4.clone(),
            tau: 0.4,
            lambda: None,
            expected: 0.46453728894504875,
        },
        LossFixture {
            name: "4 nodes weighted",
            z_topo: z4,
            z_attr: z4p,
            positives: p4,
            tau: 0.4,
            lambda: Some(0.3),
            expected: 0.4454627667689701,
        },
    ]
}

/// Random embeddings (n ≤ 8, d ≤ 6), positive sets and temperature.
pub fn random_loss_instance(seed: u64) -> (Matrix, Matrix, Vec<Vec<usize>>, f64) {
    let mut rng = substream(seed, "loss-instance");
    let n = rng.gen_range(2..=8);
    let d = rng.gen_range(1..=6);
    let z = away_from_zero(&mut rng, n, d);
    let zp = away_from_zero(&mut rng, n, d);
    let density = rng.gen_range(0.0..1.0);
    let p = (0..n).map(|i| (0..n).filter(|&j| j != i && rng.gen_bool(density)).collect()).collect();
    (z, zp, p, rng.gen_range(0.05..2.0))
}
