//! Reference trainer that produces genuine per-epoch perplexity traces, and a
//! parametric trace generator for pipeline fixtures.

mod model;
mod planted;
mod synth;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use model::VOCAB;
pub use planted::{planted_corpus, planted_records, Difficulty, PlantedSample, PlantedSpec};
pub use synth::{synth_traces, SynthSpec};

use crate::par;
use crate::record::{PerplexityTrace, SampleRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("invalid trainer config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub hidden_dim: usize,
    /// Width of each byte and prompt-word embedding.
    pub embed_dim: usize,
    /// Base learning rate; epoch `e` (1-based) uses `lr / sqrt(e)`.
    pub lr: f64,
    /// Samples per SGD step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self { epochs: 3, hidden_dim: 64, embed_dim: 16, lr: 0.1, batch_size: 16, seed: 0 }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1"));
        }
        if self.hidden_dim < 2 {
            return Err(TrainError::InvalidConfig("hidden_dim must be >= 2"));
        }
        if self.embed_dim < 1 {
            return Err(TrainError::InvalidConfig("embed_dim must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig("lr must be a positive finite number"));
        }
        Ok(())
    }

    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        self.lr / libm::sqrt(epoch as f64)
    }
}

/// Traces in corpus order, every one of length `epochs + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub traces: Vec<PerplexityTrace>,
    pub epochs: usize,
    /// Ids of samples with an empty output; their traces are constant at the
    /// uniform-model perplexity.
    pub empty_output_ids: Vec<String>,
}

/// Trains the reference model on `corpus` for `cfg.epochs` epochs and records
/// every sample's output-only perplexity before training and after each epoch.
///
/// Perplexity is `exp` of the mean negative log-likelihood of the output
/// bytes given the prompt. Samples with empty outputs are left out of
/// training and get `VOCAB` at every boundary. Results depend only on
/// `(corpus, cfg)`, not on thread count.
pub fn train_and_trace(corpus: &[SampleRecord], cfg: &TrainerConfig) -> Result<TraceSet, TrainError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut ids = BTreeSet::new();
    if let Some(dup) = corpus.iter().find(|s| !ids.insert(s.id.as_str())) {
        return Err(TrainError::DuplicateId(dup.id.clone()));
    }

    let encoded: Vec<model::Encoded> = corpus.iter().map(|s| model::encode(&s.prompt(), &s.output)).collect();
    let trainable: Vec<usize> = (0..corpus.len()).filter(|&i| !encoded[i].target.is_empty()).collect();
    let mut net = model::Model::new(cfg.embed_dim, cfg.hidden_dim, cfg.seed);

    let evaluate = |net: &model::Model| -> Vec<f64> {
        par::map(&encoded, |s| {
            if s.target.is_empty() {
                VOCAB as f64
            } else {
                libm::exp(net.sample_nll(s) / s.target.len() as f64)
            }
        })
    };

    let mut boundaries: Vec<Vec<f64>> = Vec::with_capacity(cfg.epochs + 1);
    boundaries.push(evaluate(&net));
    let mut grad = None;
    for epoch in 1..=cfg.epochs {
        let mut order = trainable.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let lr = cfg.lr_for_epoch(epoch) as f32;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&model::Encoded> = chunk.iter().map(|&i| &encoded[i]).collect();
            net.sgd_step(&batch, lr, &mut grad);
        }
        boundaries.push(evaluate(&net));
    }

    let traces = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ppl = boundaries.iter().map(|b| b[i]).collect();
            PerplexityTrace::new(s.id.clone(), ppl).expect("perplexities are finite and positive")
        })
        .collect();
    let empty_output_ids = corpus.iter().filter(|s| s.output.is_empty()).map(|s| s.id.clone()).collect();
    Ok(TraceSet { traces, epochs: cfg.epochs, empty_output_ids })
}
