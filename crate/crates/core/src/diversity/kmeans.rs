//! Lloyd's k-means with k-means++ seeding on L2-normalized embeddings.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterConfig;
use crate::par;
use crate::record::{ClusterAssignment, EmbeddingRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("embedding {id} has dimension {got}, expected {expected}")]
    DimensionMismatch { id: alloc::string::String, expected: usize, got: usize },
    #[error("k must be >= 1")]
    ZeroClusters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// One entry per input embedding, in input order.
    pub assignments: Vec<ClusterAssignment>,
    /// `k x d`, row `c` is the centroid of cluster `c`.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    pub iters_run: usize,
    /// Inertia after every assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
    /// True when the last assignment step changed nothing, so centroids are
    /// exactly the means of their members.
    pub converged: bool,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

/// Index and squared distance of the nearest centroid; ties go to the lower index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    par::map(points, |p| nearest(p, centroids)).into_iter().unzip()
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final partial sum
            pick.unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).unwrap())
        } else {
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[pick]));
        }
        centroids.push(points[pick].clone());
    }
    centroids
}

fn update_means(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(labels) {
        counts[c] += 1;
        sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    (sums, counts)
}

/// Moves every empty cluster's centroid onto the point farthest from its own
/// centroid, taking points only from clusters that keep at least one member.
/// Returns whether anything moved.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>], counts: &mut [usize]) -> bool {
    let mut moved = false;
    for empty in 0..centroids.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = labels[i];
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { break };
        counts[labels[i]] -= 1;
        counts[empty] = 1;
        labels[i] = empty;
        centroids[empty] = points[i].clone();
        moved = true;
    }
    moved
}

/// Clusters `embeddings` into `cfg.resolve_k(N)` groups.
///
/// Vectors are L2-normalized first (zero vectors stay zero). Iterations stop
/// when an assignment step changes nothing, when the relative inertia
/// improvement falls below `cfg.conv_tol`, or after `cfg.max_iters`
/// assignment steps. The returned assignments are always nearest-centroid
/// with respect to the returned centroids. Cluster labels are renumbered by
/// first occurrence when points are visited in lexicographic id order.
///
/// When the data has fewer distinct points than `k`, surplus clusters stay
/// empty and are dropped, so the result may hold fewer than `k` centroids.
pub fn kmeans(embeddings: &[EmbeddingRecord], cfg: &ClusterConfig) -> Result<KMeansResult, ClusterError> {
    let n = embeddings.len();
    let k = cfg.resolve_k(n);
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if n < k {
        return Err(ClusterError::TooFewPoints { n, k });
    }
    let dim = embeddings[0].dim();
    if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(ClusterError::DimensionMismatch { id: e.id.clone(), expected: dim, got: e.dim() });
    }
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| normalized(&e.vec)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = seed_plus_plus(&points, k, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut dists: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters_run = 0;

    while iters_run < cfg.max_iters.max(1) {
        let (new_labels, new_dists) = assign(&points, &centroids);
        iters_run += 1;
        let inertia: f64 = new_dists.iter().sum();
        let unchanged = new_labels == labels;
        labels = new_labels;
        dists = new_dists;
        let prev = history.last().copied();
        history.push(inertia);
        if unchanged {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - inertia) / prev < cfg.conv_tol {
                break;
            }
        }
        if iters_run == cfg.max_iters {
            break;
        }
        let (means, mut counts) = update_means(&points, &labels, k, dim);
        centroids = means;
        repair_empty(&points, &mut labels, &mut centroids, &mut counts);
    }

    // An early stop can leave a cluster without members; reseed and reassign.
    for _ in 0..k {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        if counts.iter().all(|&c| c > 0) || !repair_empty(&points, &mut labels, &mut centroids, &mut counts) {
            break;
        }
        let (l, d) = assign(&points, &centroids);
        labels = l;
        dists = d;
        converged = false;
    }

    // dense relabel by first occurrence in id order
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by(|&a, &b| embeddings[a].id.cmp(&embeddings[b].id));
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &i in &by_id {
        if relabel[labels[i]] == usize::MAX {
            relabel[labels[i]] = next;
            next += 1;
        }
    }
    let mut ordered = vec![Vec::new(); next];
    for (old, new) in relabel.iter().enumerate() {
        if *new != usize::MAX {
            ordered[*new] = core::mem::take(&mut centroids[old]);
        }
    }

    let assignments = embeddings
        .iter()
        .zip(&labels)
        .map(|(e, &c)| ClusterAssignment { id: e.id.clone(), cluster: relabel[c] })
        .collect();
    Ok(KMeansResult {
        assignments,
        centroids: ordered,
        inertia: dists.iter().sum(),
        iters_run,
        inertia_history: history,
        converged,
    })
}
