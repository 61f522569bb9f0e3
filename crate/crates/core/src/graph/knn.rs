use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Mat};
use serde::{Deserialize, Serialize};

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Symmetric neighbor lists. Every node lists itself; lists are sorted and
/// free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Builds from arbitrary undirected edges, adding self-loops.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Shape(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Adjacency { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Undirected edges `(a, b)` with `a < b`, self-loops excluded.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Adjacency {
        let n = self.len();
        let edges = self.edges().into_iter().map(|(a, b)| (perm[a], perm[b]));
        Adjacency::from_edges(n, edges).expect("permutation stays in range")
    }
}

/// Union-symmetrized kNN graph on Euclidean distance between rows. Ties are
/// broken by the lower index.
pub fn build_knn_graph(baselines: &Mat, k: usize) -> Result<Adjacency> {
    let n = baselines.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    if !baselines.is_finite() {
        return Err(Error::NonFinite("baseline matrix".into()));
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i).map(|j| (squared_distance(baselines.row(i), baselines.row(j)), j)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(order[..k].iter().map(|&(_, j)| (i, j)));
    }
    Adjacency::from_edges(n, edges)
}
