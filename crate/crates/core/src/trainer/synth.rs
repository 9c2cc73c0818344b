//! Parametric perplexity trajectories with known difficulty labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TraceSet;
use crate::record::PerplexityTrace;

pub const EASY_LP1: f64 = 0.9;
pub const HARD_LP1: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_easy: usize,
    pub n_hard: usize,
    pub n_noisy: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform noise added to `P_0` (relative) and to the
    /// first-epoch share. Must be below 0.09.
    pub jitter: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n_easy: 0, n_hard: 0, n_noisy: 0, epochs: 3, seed: 0, jitter: 0.02 }
    }
}

/// Share of the total drop taken in each epoch; sums to 1 when `epochs > 1`.
fn shares(first: f64, epochs: usize) -> Vec<f64> {
    let mut f = vec![first];
    if epochs > 1 {
        let rest = (1.0 - first) / (epochs - 1) as f64;
        f.extend(core::iter::repeat_n(rest, epochs - 1));
    }
    f
}

fn noisy_shares(epochs: usize) -> Vec<f64> {
    match epochs {
        1 => vec![-0.2],
        2 => vec![1.5, -0.5],
        n => {
            let mut f = vec![0.6, -0.4];
            f.extend(core::iter::repeat_n(0.8 / (n - 2) as f64, n - 2));
            f
        }
    }
}

fn trajectory(p0: f64, drop: f64, shares: &[f64]) -> Vec<f64> {
    let mut ppl = Vec::with_capacity(shares.len() + 1);
    ppl.push(p0);
    let mut cur = p0;
    for s in shares {
        cur -= drop * s;
        ppl.push(cur);
    }
    ppl
}

/// Generates traces with ids `easy-NNNNN`, `hard-NNNNN`, `noisy-NNNNN`.
///
/// Easy samples take 90% of their drop in epoch 1 and hard samples 10%, the
/// rest spread evenly over later epochs (net drop 90% of `P_0`). Noisy
/// samples go down, back up, and down again (net drop 50%); with a single
/// epoch they simply end higher than they started.
///
/// # Panics
/// If `epochs == 0`, the total count is zero, or `jitter` is outside `[0, 0.09)`.
pub fn synth_traces(spec: &SynthSpec) -> TraceSet {
    assert!(spec.epochs >= 1, "epochs must be >= 1");
    assert!(spec.n_easy + spec.n_hard + spec.n_noisy >= 1, "need at least one sample");
    assert!((0.0..0.09).contains(&spec.jitter), "jitter must be in [0, 0.09)");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise = |scale: f64| if scale == 0.0 { 0.0 } else { (rng.random::<f64>() * 2.0 - 1.0) * scale };

    let mut traces = Vec::with_capacity(spec.n_easy + spec.n_hard + spec.n_noisy);
    for (prefix, count, first) in [("easy", spec.n_easy, EASY_LP1), ("hard", spec.n_hard, HARD_LP1)] {
        for i in 0..count {
            let p0 = 100.0 * (1.0 + noise(spec.jitter));
            let f = shares(first + noise(spec.jitter), spec.epochs);
            let ppl = trajectory(p0, 0.9 * p0, &f);
            traces.push(PerplexityTrace::new(format!("{prefix}-{i:05}"), ppl).expect("positive by construction"));
        }
    }
    for i in 0..spec.n_noisy {
        let p0 = 100.0 * (1.0 + noise(spec.jitter));
        let ppl = trajectory(p0, 0.5 * p0, &noisy_shares(spec.epochs));
        traces.push(PerplexityTrace::new(format!("noisy-{i:05}"), ppl).expect("positive by construction"));
    }
    TraceSet { traces, epochs: spec.epochs, empty_output_ids: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{lp_exact, rank_ascending};

    #[test]
    fn exact_parameters_without_jitter() {
        let ts = synth_traces(&SynthSpec { n_easy: 1, n_hard: 1, jitter: 0.0, ..Default::default() });
        let lp: Vec<f64> = ts.traces.iter().map(|t| lp_exact(t, 1, 1e-9).unwrap().value).collect();
        assert!((lp[0] - 0.9).abs() < 1e-12);
        assert!((lp[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn noisy_is_non_monotone() {
        for epochs in 1..=5 {
            let ts = synth_traces(&SynthSpec { n_noisy: 1, epochs, ..Default::default() });
            let p = ts.traces[0].ppl();
            assert!(p.windows(2).any(|w| w[1] > w[0]), "{p:?}");
        }
    }

    #[test]
    fn hard_ranks_before_easy() {
        let ts = synth_traces(&SynthSpec { n_easy: 150, n_hard: 100, n_noisy: 50, jitter: 0.0, ..Default::default() });
        let scores: Vec<_> = ts.traces.iter().map(|t| lp_exact(t, 1, 1e-9).unwrap()).collect();
        let rank = rank_ascending(&scores).unwrap();
        let last_hard = rank.iter().rposition(|id| id.starts_with("hard")).unwrap();
        let first_easy = rank.iter().position(|id| id.starts_with("easy")).unwrap();
        assert!(last_hard < first_easy);
    }

    #[test]
    fn jitter_stays_near_targets() {
        let ts = synth_traces(&SynthSpec { n_easy: 50, n_hard: 50, epochs: 2, seed: 3, ..Default::default() });
        assert!(ts.traces.iter().all(|t| t.ppl().len() == 3));
        for t in &ts.traces {
            let v = lp_exact(t, 1, 1e-9).unwrap().value;
            let target = if t.id().starts_with("easy") { 0.9 } else { 0.1 };
            assert!((v - target).abs() <= 0.02 + 1e-12);
        }
    }
}
