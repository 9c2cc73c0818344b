use std::io;
use std::path::PathBuf;

use lpselect_core::analytics::AnalyticsError;
use lpselect_core::diversity::ClusterError;
use lpselect_core::{MetricError, SelectError, TraceError, TrainError};

/// A problem with the contents of one input file.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: malformed JSON object: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: missing or mistyped field `{field}`")]
    MissingField { field: &'static str, line: usize },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: id {id} is not in the corpus")]
    UnknownId { id: String, line: usize },
    #[error("line {line}: trace has {got} perplexity values but earlier traces have {expected}")]
    InconsistentEpochCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: {source}")]
    InvalidTrace { line: usize, source: TraceError },
    #[error("line {line}: vector has dimension {got}, expected {expected}")]
    DimensionMismatch { line: usize, expected: usize, got: usize },
    #[error("line {line}: {what}")]
    InvalidValue { line: usize, what: String },
    #[error("cluster labels are not dense: {0}")]
    SparseClusters(String),
    #[error("corpus id {0} has no entry")]
    MissingId(String),
    #[error("file is empty")]
    Empty,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format { path: path.into(), source }
    }

    /// 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
