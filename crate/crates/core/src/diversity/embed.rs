use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::record::{EmbeddingRecord, SampleRecord};

pub const DEFAULT_EMBED_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

// splitmix64 finalizer; spreads FNV output over all bits before bucketing
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn sample_text(sample: &SampleRecord) -> String {
    let mut text = String::new();
    for field in [&sample.instruction, &sample.input, &sample.output] {
        if field.is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&field.to_lowercase());
    }
    text
}

/// Signed feature-hashed bag of character trigrams over
/// instruction, input and output, L2-normalized.
///
/// Texts shorter than three characters hash as a single gram. A sample with
/// no text at all maps to the zero vector (see [`EmbeddingRecord::is_zero`]).
///
/// # Panics
/// If `dim < 8`.
pub fn fallback_embed(sample: &SampleRecord, dim: usize, seed: u64) -> EmbeddingRecord {
    assert!(dim >= 8, "embedding dimension must be at least 8, got {dim}");
    let text = sample_text(sample);
    let mut vec = vec![0.0f64; dim];
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut add = |gram: &str| {
        let h = mix(fnv1a(seed, gram.as_bytes()));
        let bucket = (h % dim as u64) as usize;
        vec[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    };
    if chars.len() < 3 {
        if !text.is_empty() {
            add(&text);
        }
    } else {
        for w in 0..=chars.len() - 3 {
            let start = chars[w].0;
            let end = chars.get(w + 3).map_or(text.len(), |c| c.0);
            add(&text[start..end]);
        }
    }
    let norm = libm::sqrt(vec.iter().map(|v| v * v).sum::<f64>());
    if norm > 0.0 {
        vec.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingRecord { id: sample.id.clone(), vec }
}
