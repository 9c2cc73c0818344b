//! Transferability and subset statistics: Kendall tau-b between rankings,
//! intersection-over-union between selections, and descriptive statistics of
//! a selected subset.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::Serialize;

use crate::metrics::{rank_ascending, ScoreRecord};
use crate::record::{ClusterAssignment, SampleRecord};
use crate::selector::{select_topk_low, ClusterRanking, SelectError, SelectionManifest, SelectionParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("rankings cover different id sets (first difference: {0})")]
    IdSetMismatch(String),
    #[error("need at least two items to correlate, got {0}")]
    TooFew(usize),
    #[error("iou of an empty set is undefined")]
    EmptySet,
    #[error("id {0} not found in corpus")]
    UnknownId(String),
    #[error("id {0} has no cluster assignment")]
    MissingCluster(String),
    #[error("kendall tau undefined: one ranking is constant")]
    Undefined,
    #[error(transparent)]
    Select(#[from] SelectError),
}

/// Pair counts behind Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TauCounts {
    pub n: u64,
    /// `n (n - 1) / 2`
    pub pairs: u64,
    /// Pairs tied in the first variable.
    pub ties_a: u64,
    /// Pairs tied in the second variable.
    pub ties_b: u64,
    /// Pairs tied in both.
    pub ties_both: u64,
    /// Pairs ordered oppositely by the two variables.
    pub discordant: u64,
}

impl TauCounts {
    /// Concordant minus discordant pairs.
    pub fn score(&self) -> i64 {
        self.pairs as i64 - self.ties_a as i64 - self.ties_b as i64 + self.ties_both as i64 - 2 * self.discordant as i64
    }

    pub fn tau_b(&self) -> Option<f64> {
        let denom = (self.pairs - self.ties_a) as f64 * (self.pairs - self.ties_b) as f64;
        (denom > 0.0).then(|| self.score() as f64 / libm::sqrt(denom))
    }
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending and returns the number of inversions it contained.
fn sort_counting_inversions<T: Ord + Copy>(v: &mut [T], buf: &mut Vec<T>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = sort_counting_inversions(&mut v[..mid], buf) + sort_counting_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Tau-b pair counts in O(n log n) (Knight's algorithm).
///
/// # Panics
/// If the slices differ in length.
pub fn tau_counts<T: Ord + Copy>(a: &[T], b: &[T]) -> TauCounts {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let n = a.len() as u64;
    let mut pairs: Vec<(T, T)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_unstable();
    let firsts: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let ties_a = tied_pairs(&firsts);
    let ties_both = tied_pairs(&pairs);
    let mut seconds: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let discordant = sort_counting_inversions(&mut seconds, &mut Vec::with_capacity(a.len()));
    let ties_b = tied_pairs(&seconds);
    TauCounts { n, pairs: n * n.saturating_sub(1) / 2, ties_a, ties_b, ties_both, discordant }
}

/// Kendall tau between two orderings of the same id set.
pub fn kendall_tau(rank_a: &[String], rank_b: &[String]) -> Result<f64, AnalyticsError> {
    if rank_a.len() < 2 || rank_b.len() < 2 {
        return Err(AnalyticsError::TooFew(rank_a.len().min(rank_b.len())));
    }
    let pos_b: BTreeMap<&str, usize> = rank_b.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if pos_b.len() != rank_b.len() {
        let mut seen = BTreeSet::new();
        let dup = rank_b.iter().find(|id| !seen.insert(id.as_str())).unwrap();
        return Err(AnalyticsError::IdSetMismatch(dup.clone()));
    }
    let mut seen = BTreeSet::new();
    let mut b_positions = Vec::with_capacity(rank_a.len());
    for id in rank_a {
        match pos_b.get(id.as_str()) {
            Some(p) if seen.insert(*p) => b_positions.push(*p),
            _ => return Err(AnalyticsError::IdSetMismatch(id.clone())),
        }
    }
    if b_positions.len() != rank_b.len() {
        let missing = rank_b.iter().find(|id| !rank_a.contains(id)).unwrap();
        return Err(AnalyticsError::IdSetMismatch(missing.clone()));
    }
    let a_positions: Vec<usize> = (0..rank_a.len()).collect();
    tau_counts(&a_positions, &b_positions).tau_b().ok_or(AnalyticsError::Undefined)
}

// Monotone map from f64 to i64 matching f64::total_cmp.
fn order_key(x: f64) -> i64 {
    let bits = x.to_bits() as i64;
    bits ^ ((((bits >> 63) as u64) >> 1) as i64)
}

/// Kendall tau-b between two paired value sequences; equal values count as ties.
pub fn kendall_tau_values(a: &[f64], b: &[f64]) -> Result<f64, AnalyticsError> {
    if a.len() < 2 {
        return Err(AnalyticsError::TooFew(a.len()));
    }
    let ka: Vec<i64> = a.iter().map(|x| order_key(*x)).collect();
    let kb: Vec<i64> = b.iter().map(|x| order_key(*x)).collect();
    tau_counts(&ka, &kb).tau_b().ok_or(AnalyticsError::Undefined)
}

/// `|A ∩ B| / |A ∪ B|` over the distinct ids of each selection.
pub fn iou(set_a: &[String], set_b: &[String]) -> Result<f64, AnalyticsError> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(AnalyticsError::EmptySet);
    }
    let a: BTreeSet<&str> = set_a.iter().map(String::as_str).collect();
    let b: BTreeSet<&str> = set_b.iter().map(String::as_str).collect();
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Expected IOU of two independent uniformly random subsets that each hold a
/// share `fraction` (in `(0, 1]`) of the same population.
pub fn random_iou_baseline(fraction: f64) -> f64 {
    fraction / (2.0 - fraction)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct TransferReport {
    pub kendall_tau: f64,
    pub n_common: usize,
    /// `(fraction_percent, iou)` in the order the fractions were requested.
    pub iou_by_fraction: Vec<(f64, f64)>,
    pub source_tags: (String, String),
}

/// Compares two score sets from different ranking sources over their common ids.
///
/// Tau-b is computed on the raw values, so tied scores count as ties. For
/// every fraction both sides select their hardest `fraction` percent (per
/// cluster when `clusters` is given) and the selections are compared by IOU.
pub fn transfer_report(
    a: &[ScoreRecord],
    b: &[ScoreRecord],
    fractions: &[f64],
    clusters: Option<&[ClusterAssignment]>,
    tags: (String, String),
) -> Result<TransferReport, AnalyticsError> {
    let b_by_id: BTreeMap<&str, &ScoreRecord> = b.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut common_a = Vec::new();
    let mut common_b = Vec::new();
    for s in a {
        if let Some(t) = b_by_id.get(s.id.as_str()) {
            common_a.push(s.clone());
            common_b.push((*t).clone());
        }
    }
    let n_common = common_a.len();
    if n_common < 2 {
        return Err(AnalyticsError::TooFew(n_common));
    }
    let va: Vec<f64> = common_a.iter().map(|s| s.value).collect();
    let vb: Vec<f64> = common_b.iter().map(|s| s.value).collect();
    let kendall_tau = kendall_tau_values(&va, &vb)?;

    let rank_a = rank_ascending(&common_a).map_err(|e| match e {
        crate::metrics::MetricError::DuplicateScore(id) => AnalyticsError::IdSetMismatch(id),
        _ => AnalyticsError::Undefined,
    })?;
    let rank_b = rank_ascending(&common_b).map_err(|e| match e {
        crate::metrics::MetricError::DuplicateScore(id) => AnalyticsError::IdSetMismatch(id),
        _ => AnalyticsError::Undefined,
    })?;
    let (grouped_a, grouped_b) = match clusters {
        Some(c) => {
            let keep: BTreeSet<&str> = rank_a.iter().map(String::as_str).collect();
            let restricted: Vec<ClusterAssignment> =
                c.iter().filter(|x| keep.contains(x.id.as_str())).cloned().collect();
            (ClusterRanking::new(&rank_a, &restricted)?, ClusterRanking::new(&rank_b, &restricted)?)
        }
        None => (ClusterRanking::single(rank_a), ClusterRanking::single(rank_b)),
    };
    let mut iou_by_fraction = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let p = SelectionParams::topk_low(f);
        let sa = select_topk_low(&grouped_a, &p)?;
        let sb = select_topk_low(&grouped_b, &p)?;
        let v = if sa.is_empty() && sb.is_empty() { 0.0 } else { iou_or_zero(&sa, &sb) };
        iou_by_fraction.push((f, v));
    }
    Ok(TransferReport { kendall_tau, n_common, iou_by_fraction, source_tags: tags })
}

fn iou_or_zero(a: &SelectionManifest, b: &SelectionManifest) -> f64 {
    iou(&a.ids, &b.ids).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct SubsetStats {
    pub n: usize,
    /// `None` for an empty subset.
    pub mean_output_chars: Option<f64>,
    pub mean_instruction_chars: Option<f64>,
    pub empty_output_count: usize,
    pub per_cluster_counts: BTreeMap<usize, usize>,
}

/// Character-length statistics of the selected samples. Lengths count
/// Unicode scalar values, not bytes or tokens.
pub fn subset_stats(
    manifest: &SelectionManifest,
    corpus: &[SampleRecord],
    clusters: &[ClusterAssignment],
) -> Result<SubsetStats, AnalyticsError> {
    let by_id: BTreeMap<&str, &SampleRecord> = corpus.iter().map(|s| (s.id.as_str(), s)).collect();
    let cluster_of: BTreeMap<&str, usize> = clusters.iter().map(|a| (a.id.as_str(), a.cluster)).collect();
    let mut out_chars = 0usize;
    let mut instr_chars = 0usize;
    let mut empty_output_count = 0;
    let mut per_cluster_counts = BTreeMap::new();
    for id in &manifest.ids {
        let sample = by_id.get(id.as_str()).ok_or_else(|| AnalyticsError::UnknownId(id.clone()))?;
        let cluster = cluster_of.get(id.as_str()).ok_or_else(|| AnalyticsError::MissingCluster(id.clone()))?;
        out_chars += sample.output.chars().count();
        instr_chars += sample.instruction.chars().count();
        if sample.output.is_empty() {
            empty_output_count += 1;
        }
        *per_cluster_counts.entry(*cluster).or_insert(0) += 1;
    }
    let n = manifest.ids.len();
    let mean = |total: usize| (n > 0).then(|| total as f64 / n as f64);
    Ok(SubsetStats {
        n,
        mean_output_chars: mean(out_chars),
        mean_instruction_chars: mean(instr_chars),
        empty_output_count,
        per_cluster_counts,
    })
}
