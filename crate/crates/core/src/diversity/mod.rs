//! Diversity clustering over sample embeddings.

mod embed;
mod kmeans;

pub use embed::{fallback_embed, DEFAULT_EMBED_DIM};
pub use kmeans::{kmeans, ClusterError, KMeansResult};

/// Number of clusters: fixed, or derived from the corpus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterCount {
    Fixed(usize),
    /// `max(1, floor(N / min_avg))`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: ClusterCount,
    /// Minimum average cluster size used by [`ClusterCount::Auto`].
    pub min_avg: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative inertia improvement of an iteration drops below this.
    pub conv_tol: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k: ClusterCount::Auto, min_avg: 50, seed: 0, max_iters: 100, conv_tol: 1e-6 }
    }
}

impl ClusterConfig {
    pub fn resolve_k(&self, n: usize) -> usize {
        match self.k {
            ClusterCount::Fixed(k) => k,
            ClusterCount::Auto => auto_cluster_count(n, self.min_avg),
        }
    }
}

/// Cluster count that keeps at least `min_avg` samples per cluster on average.
pub fn auto_cluster_count(n: usize, min_avg: usize) -> usize {
    (n / min_avg.max(1)).max(1)
}
