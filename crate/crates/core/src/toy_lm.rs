//! Seeded n-gram logit source with a tunable entropy knob.
//!
//! For every context the model draws a fixed vector of Gaussian logits
//! (scale [`BASE_SCALE`]) from a stream keyed on the last `order` tokens,
//! then multiplies it by `1 - entropy_knob`. Knob 0 gives sharply peaked
//! distributions, knob 1 gives exactly uniform logits. Shrinking logits
//! toward zero can only raise softmax entropy, so entropy is monotone in the
//! knob.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greenlist::{TokenId, Vocabulary};
use crate::rng::{splitmix64, stream_seed};
use crate::wmgen::{LogitSource, LogitVector};

/// Standard deviation of the knob-0 logits.
pub const BASE_SCALE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyLmConfig {
    pub vocab_size: u32,
    /// n-gram order: 1 or 2.
    pub order: usize,
    /// 0 = near-deterministic, 1 = uniform.
    pub entropy_knob: f64,
    pub seed: u64,
}

impl Default for ToyLmConfig {
    fn default() -> Self {
        Self { vocab_size: 1000, order: 1, entropy_knob: 0.9, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct ToyLm {
    cfg: ToyLmConfig,
    vocab: Vocabulary,
}

impl ToyLm {
    pub fn new(cfg: ToyLmConfig) -> Result<Self> {
        let vocab = Vocabulary::new(cfg.vocab_size)?;
        if !(1..=2).contains(&cfg.order) {
            return Err(Error::param(format!("toy LM order must be 1 or 2, got {}", cfg.order)));
        }
        if !(0.0..=1.0).contains(&cfg.entropy_knob) {
            return Err(Error::param(format!(
                "entropy_knob must lie in [0, 1], got {}",
                cfg.entropy_knob
            )));
        }
        Ok(Self { cfg, vocab })
    }

    pub fn config(&self) -> &ToyLmConfig {
        &self.cfg
    }

    fn context_seed(&self, context: &[TokenId]) -> u64 {
        let sentinel = self.vocab.sentinel();
        let mut key = self.cfg.order as u64;
        for back in (0..self.cfg.order).rev() {
            let tok = context
                .len()
                .checked_sub(back + 1)
                .map(|i| context[i])
                .unwrap_or(sentinel);
            key = splitmix64(key ^ tok as u64);
        }
        stream_seed(self.cfg.seed, key)
    }
}

impl LogitSource for ToyLm {
    fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        for &t in context {
            self.vocab.check_token(t)?;
        }
        let n = self.vocab.len();
        let shrink = 1.0 - self.cfg.entropy_knob;
        if shrink == 0.0 {
            return Ok(LogitVector::uniform(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.context_seed(context));
        let values = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shrink * BASE_SCALE * z
            })
            .collect();
        LogitVector::new(values)
    }
}

/// `count` prompts of `len` uniform random tokens, reproducible from `seed`.
pub fn synthetic_prompts(vocab: Vocabulary, count: usize, len: usize, seed: u64) -> Vec<Vec<TokenId>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, i as u64));
            (0..len).map(|_| rng.random_range(0..vocab.len() as TokenId)).collect()
        })
        .collect()
}
