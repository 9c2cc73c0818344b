//! Record types shared by every stage of the pipeline.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One instruction-tuning example.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SampleRecord {
    pub id: String,
    pub instruction: String,
    /// May be empty.
    pub input: String,
    /// May be empty; such samples are kept and reported as noise candidates.
    pub output: String,
}

impl SampleRecord {
    pub fn new(
        id: impl Into<String>,
        instruction: impl Into<String>,
        input: impl Into<String>,
        output: impl Into<String>,
    ) -> Self {
        Self { id: id.into(), instruction: instruction.into(), input: input.into(), output: output.into() }
    }

    /// The conditioning text: instruction, then input when present.
    pub fn prompt(&self) -> String {
        let mut p = String::with_capacity(self.instruction.len() + self.input.len() + 1);
        p.push_str(&self.instruction);
        if !self.input.is_empty() {
            p.push('\n');
            p.push_str(&self.input);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("trace needs at least two perplexity values (P_0 and one epoch), got {0}")]
    TooShort(usize),
    #[error("perplexity at index {index} is {value}; every value must be finite and > 0")]
    NonPositivePerplexity { index: usize, value: f64 },
}

/// Perplexity of one sample at every epoch boundary: `ppl[0]` before
/// training, `ppl[i]` after epoch `i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct PerplexityTrace {
    id: String,
    ppl: Vec<f64>,
}

impl PerplexityTrace {
    pub fn new(id: impl Into<String>, ppl: Vec<f64>) -> Result<Self, TraceError> {
        if ppl.len() < 2 {
            return Err(TraceError::TooShort(ppl.len()));
        }
        if let Some((index, &value)) = ppl.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(TraceError::NonPositivePerplexity { index, value });
        }
        Ok(Self { id: id.into(), ppl })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ppl(&self) -> &[f64] {
        &self.ppl
    }

    /// Number of training epochs `n` covered by the trace.
    pub fn epochs(&self) -> usize {
        self.ppl.len() - 1
    }

    pub fn initial(&self) -> f64 {
        self.ppl[0]
    }

    pub fn last(&self) -> f64 {
        self.ppl[self.ppl.len() - 1]
    }
}

/// A sample embedding. Dimension is uniform within one file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EmbeddingRecord {
    pub id: String,
    pub vec: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn is_zero(&self) -> bool {
        self.vec.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClusterAssignment {
    pub id: String,
    pub cluster: usize,
}
