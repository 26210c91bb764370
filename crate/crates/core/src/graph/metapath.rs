use super::{HeteroGraph, MetaPath, Result};

/// Meta-path based neighbour sets over target nodes, stored as CSR.
///
/// Every node's set contains the node itself and is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPathAdjacency {
    name: String,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl MetaPathAdjacency {
    /// Builds from explicit neighbour lists; self-loops are added and lists
    /// are sorted and deduplicated.
    pub fn from_lists(name: impl Into<String>, lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for (i, mut l) in lists.into_iter().enumerate() {
            l.push(i);
            l.sort_unstable();
            l.dedup();
            members.extend(l);
            offsets.push(members.len());
        }
        Self { name: name.into(), offsets, members }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Number of stored (i, j) pairs, self pairs included.
    pub fn num_pairs(&self) -> usize {
        self.members.len()
    }

    /// Applies a node relabelling: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut lists = vec![Vec::new(); self.num_nodes()];
        for i in 0..self.num_nodes() {
            lists[perm[i]] = self.neighbors(i).iter().map(|&j| perm[j]).collect();
        }
        Self::from_lists(self.name.clone(), lists)
    }
}

/// Target nodes reachable from each target node along `m`, computed by
/// composing the boolean adjacency of each hop. Only reachability is kept,
/// not the number of path instances.
pub fn meta_path_neighbors(g: &HeteroGraph, m: &MetaPath) -> Result<MetaPathAdjacency> {
    let hops = g.resolve_meta_path(m)?;
    let types: Vec<usize> = m.node_types.iter().map(|t| g.type_index(t).unwrap()).collect();

    // Per-hop adjacency lists indexed by the hop's source-side node.
    let hop_lists: Vec<Vec<Vec<usize>>> = hops
        .iter()
        .enumerate()
        .map(|(k, hop)| {
            let mut lists = vec![Vec::new(); g.node_count(types[k])];
            for &(s, d) in &g.relations()[hop.relation].edges {
                let (from, to) = if hop.reversed { (d, s) } else { (s, d) };
                lists[from].push(to);
            }
            lists
        })
        .collect();

    let n = g.target_count();
    let mut result = Vec::with_capacity(n);
    let mut marks: Vec<Vec<bool>> = types[1..].iter().map(|&t| vec![false; g.node_count(t)]).collect();
    for i in 0..n {
        let mut frontier = vec![i];
        for (k, lists) in hop_lists.iter().enumerate() {
            let mark = &mut marks[k];
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &lists[u] {
                    if !mark[v] {
                        mark[v] = true;
                        next.push(v);
                    }
                }
            }
            for &v in &next {
                mark[v] = false;
            }
            frontier = next;
        }
        result.push(frontier);
    }
    Ok(MetaPathAdjacency::from_lists(m.name.clone(), result))
}
