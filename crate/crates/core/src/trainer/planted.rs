//! Synthetic instruction corpora with known easy and hard populations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::SampleRecord;

const OBJECTS: [&str; 24] = [
    "sky", "grass", "sun", "snow", "coal", "blood", "sea", "lemon", "cherry", "orange", "plum", "salt", "ink", "cloud",
    "leaf", "rose", "banana", "tomato", "pepper", "milk", "night", "sand", "mint", "violet",
];
const COLORS: [&str; 8] = ["blue", "green", "yellow", "white", "black", "red", "purple", "brown"];
const CODE_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Difficulty {
    /// Short answer from a template shared by most of the corpus.
    Easy,
    /// A unique high-entropy string that can only be memorized.
    Hard,
    /// Empty output.
    Noisy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSample {
    pub record: SampleRecord,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub hard_fraction: f64,
    pub noisy_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self { n: 2000, hard_fraction: 0.1, noisy_fraction: 0.0, seed: 0 }
    }
}

/// Builds a corpus of `n` samples with ids `s00000..`; difficulty labels are
/// shuffled over the ids. Easy samples pick their subject with a Zipf-like
/// skew, so rarely seen subjects are somewhat harder than common ones.
pub fn planted_corpus(spec: &PlantedSpec) -> Vec<PlantedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_hard = libm::round(spec.n as f64 * spec.hard_fraction) as usize;
    let n_noisy = (libm::round(spec.n as f64 * spec.noisy_fraction) as usize).min(spec.n - n_hard.min(spec.n));
    let mut labels: Vec<Difficulty> = (0..spec.n)
        .map(|i| {
            if i < n_hard {
                Difficulty::Hard
            } else if i < n_hard + n_noisy {
                Difficulty::Noisy
            } else {
                Difficulty::Easy
            }
        })
        .collect();
    labels.shuffle(&mut rng);

    labels
        .into_iter()
        .enumerate()
        .map(|(i, difficulty)| PlantedSample {
            record: make_record(format!("s{i:05}"), i, difficulty, &mut rng),
            difficulty,
        })
        .collect()
}

/// One record per `(id, difficulty)` pair, generated the same way as
/// [`planted_corpus`].
pub fn planted_records(labels: &[(String, Difficulty)], seed: u64) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.iter().enumerate().map(|(i, (id, d))| make_record(id.clone(), i, *d, &mut rng)).collect()
}

fn make_record(id: String, i: usize, difficulty: Difficulty, rng: &mut ChaCha8Rng) -> SampleRecord {
    match difficulty {
        Difficulty::Easy => {
            // Zipf-like subject frequencies
            let total: f64 = (1..=OBJECTS.len()).map(|r| 1.0 / r as f64).sum();
            let mut u = rng.random::<f64>() * total;
            let obj = (1..=OBJECTS.len())
                .position(|r| {
                    u -= 1.0 / r as f64;
                    u < 0.0
                })
                .unwrap_or(OBJECTS.len() - 1);
            SampleRecord::new(
                id,
                format!("What color is the {}?", OBJECTS[obj]),
                "",
                format!("The {} is {}.", OBJECTS[obj], COLORS[obj % COLORS.len()]),
            )
        }
        Difficulty::Hard => {
            let len = rng.random_range(24..40);
            let code: String =
                (0..len).map(|_| char::from(CODE_ALPHABET[rng.random_range(0..CODE_ALPHABET.len())])).collect();
            SampleRecord::new(id, format!("Recite access code {i}."), "", code)
        }
        Difficulty::Noisy => SampleRecord::new(id, format!("Describe item {i}."), "", ""),
    }
}
