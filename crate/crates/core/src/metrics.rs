//! Learning-percentage difficulty scores.
//!
//! For a trace `P_0..P_n` the exact score of epoch `i` is
//! `(P_{i-1} - P_i) / (P_0 - P_n)`, the share of the total perplexity drop
//! that happened during epoch `i`. The approximate score replaces the total
//! drop by `P_0`, which makes it computable after a single epoch. Low values
//! mean the sample was learned late, so ascending order puts the hardest
//! samples first.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::record::PerplexityTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Metric {
    /// Drop during epoch `i` over the total drop `P_0 - P_n`.
    Lp,
    /// Drop during epoch `i` over `P_0`.
    LpApp,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Lp => "lp",
            Metric::LpApp => "lp_app",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lp" => Ok(Metric::Lp),
            "lp_app" | "lp-app" => Ok(Metric::LpApp),
            other => Err(MetricError::UnknownMetric(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("epoch {epoch} out of range 1..={max} for trace {id}")]
    EpochOutOfRange { id: String, epoch: usize, max: usize },
    #[error("duplicate score for id {0}")]
    DuplicateScore(String),
    #[error("unknown metric {0:?} (expected lp or lp_app)")]
    UnknownMetric(String),
    #[error("invalid metric config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub metric: Metric,
    pub epoch: usize,
    /// `|P_0 - P_n|` below this marks an exact score degenerate.
    pub denom_tolerance: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { metric: Metric::Lp, epoch: 1, denom_tolerance: 1e-9 }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.epoch < 1 {
            return Err(MetricError::InvalidConfig("epoch must be >= 1"));
        }
        if self.denom_tolerance.is_nan() || self.denom_tolerance <= 0.0 {
            return Err(MetricError::InvalidConfig("denom_tolerance must be > 0"));
        }
        Ok(())
    }

    pub fn score(&self, trace: &PerplexityTrace) -> Result<ScoreRecord, MetricError> {
        match self.metric {
            Metric::Lp => lp_exact(trace, self.epoch, self.denom_tolerance),
            Metric::LpApp => lp_approx(trace, self.epoch),
        }
    }
}

/// One sample's difficulty value under a metric and epoch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScoreRecord {
    pub id: String,
    pub metric: Metric,
    pub epoch: usize,
    pub value: f64,
    pub degenerate: bool,
}

fn check_epoch(trace: &PerplexityTrace, epoch: usize) -> Result<(), MetricError> {
    if epoch < 1 || epoch > trace.epochs() {
        return Err(MetricError::EpochOutOfRange { id: trace.id().into(), epoch, max: trace.epochs() });
    }
    Ok(())
}

/// Exact learning percentage of `epoch`.
///
/// When `|P_0 - P_n| < tol` the score is flagged degenerate and set to 1.0,
/// which ranks the sample as easy. Negative values (perplexity rose during
/// the epoch) and values above 1 pass through unchanged.
pub fn lp_exact(trace: &PerplexityTrace, epoch: usize, tol: f64) -> Result<ScoreRecord, MetricError> {
    check_epoch(trace, epoch)?;
    let p = trace.ppl();
    let total = trace.initial() - trace.last();
    let (value, degenerate) = if total.abs() < tol { (1.0, true) } else { ((p[epoch - 1] - p[epoch]) / total, false) };
    Ok(ScoreRecord { id: trace.id().into(), metric: Metric::Lp, epoch, value, degenerate })
}

/// Approximate learning percentage of `epoch`: the drop relative to `P_0`.
pub fn lp_approx(trace: &PerplexityTrace, epoch: usize) -> Result<ScoreRecord, MetricError> {
    check_epoch(trace, epoch)?;
    let p = trace.ppl();
    let value = (p[epoch - 1] - p[epoch]) / trace.initial();
    Ok(ScoreRecord { id: trace.id().into(), metric: Metric::LpApp, epoch, value, degenerate: false })
}

/// Total order used for ranking: value ascending, then id ascending.
pub fn score_order(a: &ScoreRecord, b: &ScoreRecord) -> Ordering {
    a.value.total_cmp(&b.value).then_with(|| a.id.cmp(&b.id))
}

/// Ids sorted hardest first: by value ascending, ties broken by id.
pub fn rank_ascending(scores: &[ScoreRecord]) -> Result<Vec<String>, MetricError> {
    let mut seen = BTreeSet::new();
    for s in scores {
        if !seen.insert(s.id.as_str()) {
            return Err(MetricError::DuplicateScore(s.id.clone()));
        }
    }
    let mut order: Vec<&ScoreRecord> = scores.iter().collect();
    order.sort_by(|a, b| score_order(a, b));
    Ok(order.into_iter().map(|s| s.id.clone()).collect())
}
