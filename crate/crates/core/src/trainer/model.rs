//! Byte-level next-token predictor: context-byte and prompt-word embeddings,
//! one tanh hidden layer, softmax over bytes plus BOS/EOS.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 256 byte values plus BOS and EOS.
pub const VOCAB: usize = 258;
pub const BOS: usize = 256;
/// Number of preceding output symbols fed to the model.
pub const CONTEXT: usize = 3;
/// Hash buckets for prompt words.
pub const PROMPT_BUCKETS: usize = 1024;

/// A sample prepared for the model.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub prompt_words: Vec<usize>,
    pub target: Vec<u8>,
}

fn word_bucket(word: &[u8]) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h % PROMPT_BUCKETS as u64) as usize
}

pub(crate) fn encode(prompt: &str, output: &str) -> Encoded {
    let mut prompt_words: Vec<usize> =
        prompt.as_bytes().split(|b| b.is_ascii_whitespace()).filter(|w| !w.is_empty()).map(word_bucket).collect();
    if prompt_words.is_empty() {
        prompt_words.push(0);
    }
    Encoded { prompt_words, target: output.as_bytes().to_vec() }
}

#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub emb: usize,
    pub hidden: usize,
    /// `CONTEXT` tables of `VOCAB x emb`, concatenated.
    pub ctx_emb: Vec<f32>,
    /// `PROMPT_BUCKETS x emb`.
    pub prompt_emb: Vec<f32>,
    /// `hidden x input_dim`, row major.
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// `VOCAB x hidden`, row major.
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
}

impl Model {
    pub fn input_dim(&self) -> usize {
        (CONTEXT + 1) * self.emb
    }

    /// The output layer starts at zero, so the untrained model is uniform.
    pub fn new(emb: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = (CONTEXT + 1) * emb;
        let mut uniform =
            |n: usize, scale: f32| -> Vec<f32> { (0..n).map(|_| (rng.random::<f32>() * 2.0 - 1.0) * scale).collect() };
        let ctx_emb = uniform(CONTEXT * VOCAB * emb, 0.5);
        let prompt_emb = uniform(PROMPT_BUCKETS * emb, 0.5);
        let w1 = uniform(hidden * input_dim, libm::sqrtf(6.0 / (input_dim + hidden) as f32));
        Self {
            emb,
            hidden,
            ctx_emb,
            prompt_emb,
            w1,
            b1: vec![0.0; hidden],
            w2: vec![0.0; VOCAB * hidden],
            b2: vec![0.0; VOCAB],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            emb: self.emb,
            hidden: self.hidden,
            ctx_emb: vec![0.0; self.ctx_emb.len()],
            prompt_emb: vec![0.0; self.prompt_emb.len()],
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    fn prompt_vector(&self, words: &[usize]) -> Vec<f32> {
        let mut v = vec![0.0f32; self.emb];
        for &w in words {
            let row = &self.prompt_emb[w * self.emb..(w + 1) * self.emb];
            v.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        let inv = 1.0 / words.len() as f32;
        v.iter_mut().for_each(|a| *a *= inv);
        v
    }

    fn context(target: &[u8], t: usize) -> [usize; CONTEXT] {
        core::array::from_fn(|j| if t > j { usize::from(target[t - 1 - j]) } else { BOS })
    }

    fn fill_input(&self, x: &mut [f32], ctx: &[usize; CONTEXT], prompt: &[f32]) {
        let e = self.emb;
        for (j, &sym) in ctx.iter().enumerate() {
            let base = (j * VOCAB + sym) * e;
            x[j * e..(j + 1) * e].copy_from_slice(&self.ctx_emb[base..base + e]);
        }
        x[CONTEXT * e..].copy_from_slice(prompt);
    }

    /// Hidden activations and log-softmax normalizer for one input.
    fn forward(&self, x: &[f32], h: &mut [f32], logits: &mut [f32]) -> f64 {
        let d = x.len();
        for (i, hi) in h.iter_mut().enumerate() {
            let row = &self.w1[i * d..(i + 1) * d];
            let pre = self.b1[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f32>();
            *hi = libm::tanhf(pre);
        }
        let hd = self.hidden;
        let mut max = f32::NEG_INFINITY;
        for (o, l) in logits.iter_mut().enumerate() {
            let row = &self.w2[o * hd..(o + 1) * hd];
            *l = self.b2[o] + row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f32>();
            max = max.max(*l);
        }
        // normalizer in f64 so a uniform model scores exactly ln(VOCAB)
        let sum: f64 = logits.iter().map(|l| f64::from(libm::expf(*l - max))).sum();
        f64::from(max) + libm::log(sum)
    }

    /// Sum of negative log-likelihoods of the target bytes.
    pub fn sample_nll(&self, sample: &Encoded) -> f64 {
        let prompt = self.prompt_vector(&sample.prompt_words);
        let mut x = vec![0.0f32; self.input_dim()];
        let mut h = vec![0.0f32; self.hidden];
        let mut logits = vec![0.0f32; VOCAB];
        let mut total = 0.0f64;
        for t in 0..sample.target.len() {
            self.fill_input(&mut x, &Self::context(&sample.target, t), &prompt);
            let lse = self.forward(&x, &mut h, &mut logits);
            total += lse - f64::from(logits[usize::from(sample.target[t])]);
        }
        total
    }

    /// One SGD step on the mean per-byte loss of `batch`.
    pub fn sgd_step(&mut self, batch: &[&Encoded], lr: f32, grad: &mut Option<Model>) {
        let g = grad.get_or_insert_with(|| self.zeros_like());
        g.clear();
        let positions: usize = batch.iter().map(|s| s.target.len()).sum();
        if positions == 0 {
            return;
        }
        let (e, hd, d) = (self.emb, self.hidden, self.input_dim());
        let mut x = vec![0.0f32; d];
        let mut h = vec![0.0f32; hd];
        let mut logits = vec![0.0f32; VOCAB];
        let mut dh = vec![0.0f32; hd];
        let mut dx = vec![0.0f32; d];
        for sample in batch {
            let prompt = self.prompt_vector(&sample.prompt_words);
            let mut dprompt = vec![0.0f32; e];
            for t in 0..sample.target.len() {
                let ctx = Self::context(&sample.target, t);
                self.fill_input(&mut x, &ctx, &prompt);
                let lse = self.forward(&x, &mut h, &mut logits) as f32;
                let y = usize::from(sample.target[t]);
                dh.iter_mut().for_each(|v| *v = 0.0);
                for (o, &logit) in logits.iter().enumerate() {
                    let p = libm::expf(logit - lse);
                    let dl = if o == y { p - 1.0 } else { p };
                    g.b2[o] += dl;
                    let w_row = &self.w2[o * hd..(o + 1) * hd];
                    let g_row = &mut g.w2[o * hd..(o + 1) * hd];
                    for k in 0..hd {
                        g_row[k] += dl * h[k];
                        dh[k] += dl * w_row[k];
                    }
                }
                dx.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..hd {
                    let dpre = dh[i] * (1.0 - h[i] * h[i]);
                    g.b1[i] += dpre;
                    let w_row = &self.w1[i * d..(i + 1) * d];
                    let g_row = &mut g.w1[i * d..(i + 1) * d];
                    for j in 0..d {
                        g_row[j] += dpre * x[j];
                        dx[j] += dpre * w_row[j];
                    }
                }
                for (j, &sym) in ctx.iter().enumerate() {
                    let base = (j * VOCAB + sym) * e;
                    g.ctx_emb[base..base + e].iter_mut().zip(&dx[j * e..(j + 1) * e]).for_each(|(a, b)| *a += b);
                }
                dprompt.iter_mut().zip(&dx[CONTEXT * e..]).for_each(|(a, b)| *a += b);
            }
            let inv = 1.0 / sample.prompt_words.len() as f32;
            for &w in &sample.prompt_words {
                g.prompt_emb[w * e..(w + 1) * e].iter_mut().zip(&dprompt).for_each(|(a, b)| *a += b * inv);
            }
        }
        let step = lr / positions as f32;
        self.apply(g, step);
    }

    fn clear(&mut self) {
        for v in self.params_mut() {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn params_mut(&mut self) -> [&mut Vec<f32>; 6] {
        [&mut self.ctx_emb, &mut self.prompt_emb, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn apply(&mut self, grad: &mut Model, step: f32) {
        for (p, g) in self.params_mut().into_iter().zip(grad.params_mut()) {
            p.iter_mut().zip(g.iter()).for_each(|(w, d)| *w -= step * d);
        }
    }
}
