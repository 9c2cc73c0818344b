//! Difficulty-aware curation of instruction-tuning data.
//!
//! Samples are scored by their *learning percentage*: the share of a
//! sample's total perplexity drop that happened during a given epoch. A low
//! first-epoch share marks a sample the model learned late, i.e. a hard one.
//! The crate provides
//!
//! * exact and approximate learning-percentage scores plus a deterministic
//!   ascending ranking ([`metrics`]),
//! * k-means clustering over sample embeddings and a hashed-trigram fallback
//!   embedder ([`diversity`]),
//! * cluster-stratified selection: top-k% hardest, Low/Mid/High thirds, and a
//!   size-matched random baseline ([`selector`]),
//! * Kendall tau-b, intersection-over-union and subset statistics
//!   ([`analytics`]),
//! * a small byte-level next-token model that produces real per-epoch
//!   perplexity traces, and a parametric trace generator ([`trainer`]).
//!
//! The crate is `no_std` and only needs `alloc`. The `std` feature enables
//! `std::error::Error` integration, `parallel` adds rayon-backed evaluation
//! passes (results are identical at any thread count), and `serde` derives
//! serialization for the record types.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
pub mod diversity;
pub mod metrics;
pub mod record;
pub mod selector;
pub mod trainer;

mod par;

pub use analytics::{iou, kendall_tau, subset_stats, AnalyticsError, SubsetStats, TransferReport};
pub use diversity::{auto_cluster_count, fallback_embed, kmeans, ClusterConfig, ClusterCount, KMeansResult};
pub use metrics::{lp_approx, lp_exact, rank_ascending, Metric, MetricConfig, MetricError, ScoreRecord};
pub use record::{ClusterAssignment, EmbeddingRecord, PerplexityTrace, SampleRecord, TraceError};
pub use selector::{
    partition_buckets, per_cluster_quota, select_clust_rand, select_topk_low, Bucket, BucketPartition, ClusterRanking,
    SelectError, SelectionManifest, SelectionMode, SelectionParams,
};
pub use trainer::{synth_traces, train_and_trace, SynthSpec, TraceSet, TrainError, TrainerConfig};
