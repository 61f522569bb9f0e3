use super::{check_matrix, ClusterAssignment, ClusterMethod};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One agglomeration step. Node ids follow the usual convention: leaves are
/// `0..n`, the cluster created by merge `s` is `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller node id of the pair.
    pub left: usize,
    pub right: usize,
    /// Increase in within-cluster sum of squares caused by this merge.
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Raw labels (not canonicalized) after applying the first `n - k` merges.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidK { k, n: self.n });
        }
        let mut parent: Vec<usize> = (0..2 * self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(self.n - k).enumerate() {
            let node = self.n + s;
            parent[m.left] = node;
            parent[m.right] = node;
        }
        Ok((0..self.n).map(|i| find(&mut parent, i)).collect())
    }
}

/// Builds the full Ward dendrogram over weighted squared Euclidean distance.
///
/// Cluster distances are kept as `2·n_a·n_b/(n_a+n_b)·‖c_a − c_b‖²_w` and
/// updated with the Lance–Williams recurrence for Ward linkage; the reported
/// height is half of that, the ESS increase. Ties in the minimum are broken
/// by the smallest `(left id, right id)` pair.
pub fn ward_dendrogram(vectors: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Dendrogram> {
    let dim = check_matrix(vectors)?;
    let ones;
    let w = match weights {
        Some(w) => {
            if w.len() != dim {
                return Err(Error::Shape(format!("{} weights for {dim} dimensions", w.len())));
            }
            if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::DegenerateInput("weights must be positive and finite".into()));
            }
            w
        }
        None => {
            ones = vec![1.0; dim];
            &ones[..]
        }
    };
    let n = vectors.len();

    // Slot-indexed distance matrix; slot i holds node id `ids[i]`.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .zip(w)
                .map(|((a, b), wt)| wt * (a - b) * (a - b))
                .sum();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[a * n + b];
                let (lo, hi) = if ids[a] < ids[b] { (ids[a], ids[b]) } else { (ids[b], ids[a]) };
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => d < bd || (d == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((d, lo, hi, a, b));
                }
            }
        }
        let (d, lo, hi, a, b) = best.expect("at least two active clusters");
        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
        for &x in &active {
            if x == a || x == b {
                continue;
            }
            let nx = sizes[x] as f64;
            let updated = ((na + nx) * dist[a * n + x] + (nb + nx) * dist[b * n + x] - nx * d) / (na + nb + nx);
            dist[a * n + x] = updated;
            dist[x * n + a] = updated;
        }
        sizes[a] += sizes[b];
        ids[a] = n + step;
        active.retain(|&x| x != b);
        merges.push(Merge { left: lo, right: hi, height: 0.5 * d, size: sizes[a] });
    }
    Ok(Dendrogram { n, merges })
}

/// Ward clustering cut at `k` clusters.
pub fn ward_cluster(vectors: &[Vec<f64>], weights: Option<&[f64]>, k: usize) -> Result<(ClusterAssignment, Dendrogram)> {
    if vectors.is_empty() {
        return Err(Error::DegenerateInput("no vectors".into()));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::InvalidK { k, n: vectors.len() });
    }
    let dendrogram = ward_dendrogram(vectors, weights)?;
    let raw = dendrogram.cut(k)?;
    Ok((ClusterAssignment::from_raw(ClusterMethod::WardKnowledge, &raw), dendrogram))
}
