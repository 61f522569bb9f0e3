//! Patient clustering: weighted Ward linkage on coded sequences and k-means
//! on latent embeddings.

mod kmeans;
mod metrics;
mod ward;

pub use kmeans::{kmeans, kmeans_detailed, KMeansResult, MAX_ITERATIONS};
pub use metrics::adjusted_rand_index;
pub use ward::{ward_cluster, ward_dendrogram, Dendrogram, Merge};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClusterMethod {
    WardKnowledge,
    GraphAi,
}

impl ClusterMethod {
    /// Short name used in query strings and file names.
    pub fn key(self) -> &'static str {
        match self {
            ClusterMethod::WardKnowledge => "ward",
            ClusterMethod::GraphAi => "graph",
        }
    }

    pub fn parse(s: &str) -> Option<ClusterMethod> {
        match s {
            "ward" => Some(ClusterMethod::WardKnowledge),
            "graph" => Some(ClusterMethod::GraphAi),
            _ => None,
        }
    }
}

/// Cluster labels in canonical form: label 0 is the largest cluster, ties
/// broken by the smallest member index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub method: ClusterMethod,
    pub k: usize,
    pub labels: Vec<usize>,
    pub cluster_names: Vec<String>,
}

impl ClusterAssignment {
    /// Canonicalizes arbitrary raw labels. Every raw label value present
    /// becomes one cluster.
    pub fn from_raw(method: ClusterMethod, raw: &[usize]) -> Self {
        let (labels, k) = canonical_labels(raw);
        let cluster_names = (0..k).map(cluster_name).collect();
        ClusterAssignment { method, k, labels, cluster_names }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == cluster).map(|(i, _)| i).collect()
    }

    pub fn check(&self) -> Result<()> {
        let sizes = self.sizes();
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(c));
        }
        if self.labels.iter().any(|&l| l >= self.k) {
            return Err(Error::InvalidK { k: self.k, n: self.labels.len() });
        }
        Ok(())
    }
}

/// Relabels so clusters are ordered by descending size, then by first
/// member. Returns the labels and the number of clusters.
pub(crate) fn canonical_labels(raw: &[usize]) -> (Vec<usize>, usize) {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (i, &r) in raw.iter().enumerate() {
        let e = groups.entry(r).or_insert((0, i));
        e.0 += 1;
    }
    let mut order: Vec<(usize, usize, usize)> = groups.iter().map(|(&r, &(size, first))| (r, size, first)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let remap: BTreeMap<usize, usize> = order.iter().enumerate().map(|(new, &(r, _, _))| (r, new)).collect();
    (raw.iter().map(|r| remap[r]).collect(), order.len())
}

/// Display name: A, B, ..., Z, AA, AB, ...
pub fn cluster_name(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        out.push(b'A' + rem as u8);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Parses a display name back into an index.
pub fn cluster_index(name: &str) -> Option<usize> {
    if name.is_empty() || name.len() > 6 || !name.bytes().all(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let mut n = 0usize;
    for b in name.bytes() {
        n = n * 26 + (b - b'A' + 1) as usize;
    }
    Some(n - 1)
}

fn check_matrix(vectors: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Err(Error::DegenerateInput("no vectors".into()));
    };
    let dim = first.len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Shape(format!("row {i} has {} columns, expected {dim}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("input row {i}")));
        }
    }
    Ok(dim)
}
