//! Ground truth: exhaustive QAP solving, permutation enumeration, and small
//! graph enumeration up to isomorphism.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{arg_err, QapError, Result};
use crate::matrix::Matrix;
use crate::qap::{objective_unchecked, Permutation, QapInstance};

pub const MAX_BRUTE_FORCE_N: usize = 10;
pub const MAX_GRAPH_ENUMERATION_N: usize = 6;
/// Edge bitmasks are `u64`, so graphs carry at most 11 vertices.
pub const MAX_GRAPH_N: usize = 11;

/// Advances `p` to the next permutation in lexicographic order; returns false
/// (leaving `p` sorted ascending) after the last one.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        p.reverse();
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        f(&p);
        if !next_permutation(&mut p) {
            break;
        }
    }
}

pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    for_each_permutation(n, |p| out.push(Permutation::new(p.to_vec()).expect("valid")));
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// First optimum in lexicographic order.
    pub best_sigma: Permutation,
    pub best_value: f64,
    /// SHA-256 over the sorted objective values, each quantized to 1e-9.
    pub value_multiset_hash: String,
}

/// Exact QAP optimum by enumerating all `n!` permutations.
pub fn brute_force_qap(inst: &QapInstance) -> Result<BruteForceResult> {
    let n = inst.n();
    if n > MAX_BRUTE_FORCE_N {
        return Err(QapError::TooLarge {
            what: "brute-force QAP",
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    let mut best_value = f64::INFINITY;
    let mut best = Vec::new();
    let mut quantized = Vec::new();
    for_each_permutation(n, |p| {
        let v = objective_unchecked(inst, p);
        // later near-ties do not displace the first optimum
        if best.is_empty() || v < best_value - 1e-12 * (1.0 + best_value.abs()) {
            best_value = v;
            best = p.to_vec();
        }
        quantized.push((v * 1e9).round() as i64);
    });
    quantized.sort_unstable();
    let mut hasher = Sha256::new();
    for q in &quantized {
        hasher.update(q.to_le_bytes());
    }
    Ok(BruteForceResult {
        best_sigma: Permutation::new(best)?,
        best_value,
        value_multiset_hash: hex::encode(hasher.finalize()),
    })
}

/// Simple undirected graph on `n <= 11` vertices, stored as an edge bitmask.
///
/// Bit `t` corresponds to the `t`-th vertex pair `(i, j)`, `i < j`, in
/// row-major order: `(0,1), (0,2), .., (0,n-1), (1,2), ..`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    n: usize,
    edges: u64,
}

#[inline]
fn pair_bit(i: usize, j: usize, n: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl Graph {
    pub fn empty(n: usize) -> Result<Self> {
        if n > MAX_GRAPH_N {
            return Err(QapError::TooLarge {
                what: "graph",
                n,
                max: MAX_GRAPH_N,
            });
        }
        Ok(Graph { n, edges: 0 })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return arg_err(format!("invalid edge ({i},{j}) for n = {n}"));
            }
            g.edges |= 1 << pair_bit(i, j, n);
        }
        Ok(g)
    }

    /// From a symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn from_adjacency(adj: &Matrix) -> Result<Self> {
        if !adj.is_square() {
            return arg_err("adjacency matrix must be square");
        }
        let n = adj.rows();
        let mut g = Self::empty(n)?;
        for i in 0..n {
            if adj[(i, i)] != 0.0 {
                return arg_err("adjacency matrix must have zero diagonal");
            }
            for j in 0..n {
                let v = adj[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return arg_err("adjacency entries must be 0 or 1");
                }
                if v != adj[(j, i)] {
                    return arg_err("adjacency matrix must be symmetric");
                }
                if i < j && v == 1.0 {
                    g.edges |= 1 << pair_bit(i, j, n);
                }
            }
        }
        Ok(g)
    }

    pub(crate) fn from_mask(n: usize, edges: u64) -> Self {
        Graph { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u64 {
        self.edges
    }

    pub fn num_pairs(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn edge_count(&self) -> usize {
        self.edges.count_ones() as usize
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges >> pair_bit(i, j, self.n) & 1 == 1
    }

    pub fn adjacency(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if self.has_edge(i, j) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Graph with vertex `v` renamed to `relabel[v]`.
    pub fn relabeled(&self, relabel: &[usize]) -> Graph {
        let n = self.n;
        let mut edges = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) {
                    edges |= 1 << pair_bit(relabel[i], relabel[j], n);
                }
            }
        }
        Graph { n, edges }
    }

    /// Adjacency bit string read in pair order, first pair most significant.
    /// Comparing codes compares the bit strings lexicographically.
    pub fn code(&self) -> u64 {
        let e = self.num_pairs();
        (0..e).fold(0u64, |acc, t| (acc << 1) | (self.edges >> t & 1))
    }
}

/// Relabeling of `g` whose adjacency bit string is lexicographically minimal.
pub fn canonical_form(g: &Graph) -> Result<Graph> {
    if g.n > MAX_GRAPH_ENUMERATION_N {
        return Err(QapError::TooLarge {
            what: "graph canonicalization",
            n: g.n,
            max: MAX_GRAPH_ENUMERATION_N,
        });
    }
    let mut best = *g;
    let mut best_code = g.code();
    for_each_permutation(g.n, |p| {
        let h = g.relabeled(p);
        let c = h.code();
        if c < best_code {
            best_code = c;
            best = h;
        }
    });
    Ok(best)
}

/// One canonical representative per isomorphism class on `n <= 6` vertices,
/// ordered by edge count and then by canonical code.
pub fn enumerate_graphs(n: usize) -> Result<Vec<Graph>> {
    if n > MAX_GRAPH_ENUMERATION_N {
        return Err(QapError::TooLarge {
            what: "graph enumeration",
            n,
            max: MAX_GRAPH_ENUMERATION_N,
        });
    }
    let pairs = n * n.saturating_sub(1) / 2;
    let perms: Vec<Vec<usize>> = {
        let mut v = Vec::new();
        for_each_permutation(n, |p| v.push(p.to_vec()));
        v
    };
    let mut classes = BTreeSet::new();
    let mut seen = vec![false; 1usize << pairs];
    for mask in 0u64..(1u64 << pairs) {
        if seen[mask as usize] {
            continue;
        }
        let g = Graph::from_mask(n, mask);
        let mut best = g;
        let mut best_code = g.code();
        for p in &perms {
            let h = g.relabeled(p);
            seen[h.edges as usize] = true;
            let c = h.code();
            if c < best_code {
                best_code = c;
                best = h;
            }
        }
        classes.insert((best.edge_count(), best_code, best.edges));
    }
    Ok(classes
        .into_iter()
        .map(|(_, _, edges)| Graph::from_mask(n, edges))
        .collect())
}

/// Identity-labeled containment: every edge of `g1` is an edge of `g2`.
pub fn is_subgraph(g1: &Graph, g2: &Graph) -> Result<bool> {
    if g1.n != g2.n {
        return arg_err("graphs have different vertex counts");
    }
    Ok(g1.edges & !g2.edges == 0)
}

/// Export record for a graph list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphRecord {
    /// 1-based position within the enumeration.
    pub index: usize,
    pub edges: usize,
    pub adjacency: Vec<Vec<u8>>,
}

pub fn graph_records(graphs: &[Graph]) -> Vec<GraphRecord> {
    graphs
        .iter()
        .enumerate()
        .map(|(i, g)| GraphRecord {
            index: i + 1,
            edges: g.edge_count(),
            adjacency: (0..g.n)
                .map(|a| (0..g.n).map(|b| g.has_edge(a, b) as u8).collect())
                .collect(),
        })
        .collect()
}

/// Number of unordered pairs of graphs, with or without self-pairs.
pub fn pair_count(classes: usize, with_self: bool) -> usize {
    classes * classes.saturating_sub(1) / 2 + if with_self { classes } else { 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let mut seen = Vec::new();
        for_each_permutation(3, |p| seen.push(p.to_vec()));
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn zero_flow_brute_force() {
        let inst = QapInstance::new(Matrix::zeros(4, 4), Matrix::ones(4, 4)).unwrap();
        let r = brute_force_qap(&inst).unwrap();
        assert_eq!(r.best_value, 0.0);
        assert!(r.best_sigma.is_identity());
    }

    #[test]
    fn refuses_large_n() {
        let inst = QapInstance::new(Matrix::zeros(11, 11), Matrix::zeros(11, 11)).unwrap();
        assert!(matches!(
            brute_force_qap(&inst),
            Err(QapError::TooLarge { .. })
        ));
        assert!(enumerate_graphs(7).is_err());
    }

    #[test]
    fn two_vertex_graphs() {
        let gs = enumerate_graphs(2).unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].edge_count(), 0);
        assert_eq!(gs[1].edge_count(), 1);
    }

    #[test]
    fn isomorphic_paths_share_canonical_form() {
        let p1 = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p2 = Graph::from_edges(3, &[(1, 0), (0, 2)]).unwrap();
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(canonical_form(&p1).unwrap(), canonical_form(&p2).unwrap());
        assert_ne!(canonical_form(&p1).unwrap(), canonical_form(&tri).unwrap());
    }

    #[test]
    fn subgraph_cases() {
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let empty = Graph::empty(3).unwrap();
        assert!(is_subgraph(&path, &path).unwrap());
        assert!(is_subgraph(&empty, &tri).unwrap());
        assert!(!is_subgraph(&tri, &path).unwrap());
        assert!(is_subgraph(&path, &Graph::empty(4).unwrap()).is_err());
    }

    #[test]
    fn adjacency_roundtrip() {
        let g = Graph::from_edges(5, &[(0, 4), (2, 3), (1, 2)]).unwrap();
        assert_eq!(Graph::from_adjacency(&g.adjacency()).unwrap(), g);
    }

    #[test]
    fn pair_conventions() {
        assert_eq!(pair_count(4, false), 6);
        assert_eq!(pair_count(11, true), 66);
        assert_eq!(pair_count(34, true), 595);
        assert_eq!(pair_count(156, true), 12_246);
    }
}
