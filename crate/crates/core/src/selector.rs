//! Cluster-stratified subset selection.
//!
//! Every selection works cluster by cluster on the ascending (hardest first)
//! ranking restricted to that cluster, so the chosen subset keeps the
//! corpus's topical spread.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::metrics::Metric;
use crate::record::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("id {0} has a cluster but no rank")]
    MissingRank(String),
    #[error("id {0} has a rank but no cluster")]
    MissingCluster(String),
    #[error("id {0} appears more than once")]
    DuplicateId(String),
    #[error("fraction must be in (0, 100], got {0}")]
    InvalidFraction(f64),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SelectionMode {
    TopkLow,
    Bucket,
    ClustRand,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::TopkLow => "topk_low",
            SelectionMode::Bucket => "bucket",
            SelectionMode::ClustRand => "clust_rand",
        }
    }
}

impl FromStr for SelectionMode {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "topk_low" => Ok(SelectionMode::TopkLow),
            "bucket" => Ok(SelectionMode::Bucket),
            "clust_rand" => Ok(SelectionMode::ClustRand),
            _ => Err(SelectError::Unknown { what: "selection mode", value: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Bucket {
    Low,
    Mid,
    High,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Low, Bucket::Mid, Bucket::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Low => "low",
            Bucket::Mid => "mid",
            Bucket::High => "high",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Bucket::Low),
            "mid" => Ok(Bucket::Mid),
            "high" => Ok(Bucket::High),
            _ => Err(SelectError::Unknown { what: "bucket", value: s.into() }),
        }
    }
}

/// How a manifest was produced.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SelectionParams {
    pub mode: SelectionMode,
    pub metric: Metric,
    pub epoch: usize,
    /// Set for `topk_low` and `clust_rand`.
    pub fraction_percent: Option<f64>,
    /// Set for `bucket`.
    pub bucket: Option<Bucket>,
    /// Set for `clust_rand`.
    pub seed: Option<u64>,
    /// Free-form label of the model whose traces produced the ranking.
    pub ranking_source_tag: String,
    /// Hex SHA-256 of the canonical corpus; filled in by the IO layer.
    pub corpus_hash: String,
}

impl SelectionParams {
    pub fn topk_low(fraction_percent: f64) -> Self {
        Self::with_mode(SelectionMode::TopkLow, Some(fraction_percent), None, None)
    }

    pub fn bucket(bucket: Bucket) -> Self {
        Self::with_mode(SelectionMode::Bucket, None, Some(bucket), None)
    }

    pub fn clust_rand(fraction_percent: f64, seed: u64) -> Self {
        Self::with_mode(SelectionMode::ClustRand, Some(fraction_percent), None, Some(seed))
    }

    fn with_mode(
        mode: SelectionMode,
        fraction_percent: Option<f64>,
        bucket: Option<Bucket>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            mode,
            metric: Metric::Lp,
            epoch: 1,
            fraction_percent,
            bucket,
            seed,
            ranking_source_tag: String::new(),
            corpus_hash: String::new(),
        }
    }

    pub fn fraction(&self) -> Result<f64, SelectError> {
        let f = self.fraction_percent.unwrap_or(f64::NAN);
        if f > 0.0 && f <= 100.0 {
            Ok(f)
        } else {
            Err(SelectError::InvalidFraction(f))
        }
    }
}

/// A selected subset plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SelectionManifest {
    pub ids: Vec<String>,
    pub params: SelectionParams,
    /// RFC 3339 timestamp; set by the IO layer.
    pub created_at: String,
}

impl SelectionManifest {
    pub fn new(ids: Vec<String>, params: SelectionParams) -> Self {
        Self { ids, params, created_at: String::new() }
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        let mut seen = BTreeSet::new();
        for id in &self.ids {
            if !seen.insert(id.as_str()) {
                return Err(SelectError::DuplicateId(id.clone()));
            }
        }
        if matches!(self.params.mode, SelectionMode::TopkLow | SelectionMode::ClustRand) {
            self.params.fraction()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// The global ascending ranking split by cluster; each list stays hardest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterRanking {
    clusters: BTreeMap<usize, Vec<String>>,
}

impl ClusterRanking {
    /// Requires that every ranked id has a cluster and every clustered id a rank.
    pub fn new(ranking: &[String], clusters: &[ClusterAssignment]) -> Result<Self, SelectError> {
        let mut cluster_of = BTreeMap::new();
        for a in clusters {
            if cluster_of.insert(a.id.as_str(), a.cluster).is_some() {
                return Err(SelectError::DuplicateId(a.id.clone()));
            }
        }
        let mut grouped: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut ranked = BTreeSet::new();
        for id in ranking {
            if !ranked.insert(id.as_str()) {
                return Err(SelectError::DuplicateId(id.clone()));
            }
            let c = cluster_of.get(id.as_str()).ok_or_else(|| SelectError::MissingCluster(id.clone()))?;
            grouped.entry(*c).or_default().push(id.clone());
        }
        if let Some(a) = clusters.iter().find(|a| !ranked.contains(a.id.as_str())) {
            return Err(SelectError::MissingRank(a.id.clone()));
        }
        Ok(Self { clusters: grouped })
    }

    /// A single cluster holding the whole ranking.
    pub fn single(ranking: Vec<String>) -> Self {
        let mut clusters = BTreeMap::new();
        if !ranking.is_empty() {
            clusters.insert(0, ranking);
        }
        Self { clusters }
    }

    pub fn clusters(&self) -> impl Iterator<Item = (usize, &[String])> {
        self.clusters.iter().map(|(c, ids)| (*c, ids.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.clusters.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// `round_half_up(fraction_percent / 100 * cluster_size)`, capped at the size.
pub fn per_cluster_quota(cluster_size: usize, fraction_percent: f64) -> usize {
    let exact = fraction_percent * cluster_size as f64 / 100.0;
    // the nudge keeps products like 0.5 - 1ulp on the half-up side
    let q = libm::floor(exact + 0.5 + 1e-9);
    if q <= 0.0 {
        0
    } else {
        (q as usize).min(cluster_size)
    }
}

/// The hardest `fraction_percent` of each cluster, ordered by (cluster, rank).
pub fn select_topk_low(ranking: &ClusterRanking, params: &SelectionParams) -> Result<SelectionManifest, SelectError> {
    let fraction = params.fraction()?;
    let ids =
        ranking.clusters().flat_map(|(_, ids)| ids[..per_cluster_quota(ids.len(), fraction)].iter().cloned()).collect();
    Ok(SelectionManifest::new(ids, SelectionParams { mode: SelectionMode::TopkLow, ..params.clone() }))
}

/// Low/Mid/High thirds of one cluster of size `m`; the remainder goes to Low first, then Mid.
pub fn bucket_sizes(m: usize) -> [usize; 3] {
    let (q, r) = (m / 3, m % 3);
    [q + usize::from(r >= 1), q + usize::from(r >= 2), q]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketPartition {
    pub low: SelectionManifest,
    pub mid: SelectionManifest,
    pub high: SelectionManifest,
}

impl BucketPartition {
    pub fn get(&self, bucket: Bucket) -> &SelectionManifest {
        match bucket {
            Bucket::Low => &self.low,
            Bucket::Mid => &self.mid,
            Bucket::High => &self.high,
        }
    }
}

/// Splits each cluster's ascending ranking into contiguous thirds.
/// Low holds the hardest samples.
pub fn partition_buckets(ranking: &ClusterRanking, base: &SelectionParams) -> BucketPartition {
    let mut parts: [Vec<String>; 3] = Default::default();
    for (_, ids) in ranking.clusters() {
        let [low, mid, _] = bucket_sizes(ids.len());
        parts[0].extend_from_slice(&ids[..low]);
        parts[1].extend_from_slice(&ids[low..low + mid]);
        parts[2].extend_from_slice(&ids[low + mid..]);
    }
    let [low, mid, high] = parts;
    let manifest = |ids, bucket| {
        SelectionManifest::new(
            ids,
            SelectionParams {
                mode: SelectionMode::Bucket,
                bucket: Some(bucket),
                fraction_percent: None,
                seed: None,
                ..base.clone()
            },
        )
    };
    BucketPartition {
        low: manifest(low, Bucket::Low),
        mid: manifest(mid, Bucket::Mid),
        high: manifest(high, Bucket::High),
    }
}

/// Size-matched random baseline: from each cluster, draws the same number of
/// samples [`select_topk_low`] would take, uniformly without replacement.
///
/// Each cluster draws from its own ChaCha stream (seed, stream = cluster id),
/// so results do not depend on the order clusters are processed in. Members
/// are shuffled in lexicographic id order and the draw is emitted in that
/// order as well, cluster by cluster.
pub fn select_clust_rand(
    clusters: &[ClusterAssignment],
    params: &SelectionParams,
    seed: u64,
) -> Result<SelectionManifest, SelectError> {
    let fraction = params.fraction()?;
    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for a in clusters {
        if !seen.insert(a.id.as_str()) {
            return Err(SelectError::DuplicateId(a.id.clone()));
        }
        members.entry(a.cluster).or_default().push(a.id.as_str());
    }
    let mut ids = Vec::new();
    for (cluster, mut group) in members {
        group.sort_unstable();
        let quota = per_cluster_quota(group.len(), fraction);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cluster as u64);
        let (picked, _) = group.partial_shuffle(&mut rng, quota);
        picked.sort_unstable();
        ids.extend(picked.iter().map(|s| String::from(*s)));
    }
    Ok(SelectionManifest::new(
        ids,
        SelectionParams { mode: SelectionMode::ClustRand, seed: Some(seed), bucket: None, ..params.clone() },
    ))
}
