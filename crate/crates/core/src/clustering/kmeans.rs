use super::{canonical_labels, check_matrix, ClusterAssignment, ClusterMethod};
use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Centers in canonical label order.
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster SSE after each assignment step.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment> {
    Ok(kmeans_detailed(vectors, k, seed)?.assignment)
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding, then Lloyd iterations until the assignment stops
/// changing or `MAX_ITERATIONS` is reached.
pub fn kmeans_detailed(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let dim = check_matrix(vectors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = vectors.iter().map(|v| squared_distance(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Rounding can leave `target` past the end; fall back to the last positive weight.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            }
            pick
        } else {
            // All remaining points coincide with a center.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(v, &vectors[next]));
        }
    }
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| vectors[i].clone()).collect();

    let mut labels = vec![usize::MAX; n];
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut sse = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (c, d) = nearest(v, &centers);
            sse += d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }

        // Re-seed empty clusters with the point farthest from its center.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| (i, squared_distance(&vectors[i], &centers[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, d)) = far {
                counts[labels[i]] -= 1;
                counts[c] += 1;
                labels[i] = c;
                centers[c] = vectors[i].clone();
                sse -= d;
                changed = true;
            }
        }
        sse_history.push(sse);

        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let mut sum = vec![0.0; dim];
            for (v, _) in vectors.iter().zip(&labels).filter(|(_, &l)| l == c) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
            let m = counts[c] as f64;
            *center = sum.into_iter().map(|s| s / m).collect();
        }
    }

    let (canon, _) = canonical_labels(&labels);
    let mut ordered = vec![Vec::new(); k];
    for (raw, &new) in labels.iter().zip(&canon) {
        if ordered[new].is_empty() {
            ordered[new] = centers[*raw].clone();
        }
    }
    Ok(KMeansResult {
        assignment: ClusterAssignment::from_raw(ClusterMethod::GraphAi, &labels),
        centers: ordered,
        sse_history,
        iterations,
    })
}
