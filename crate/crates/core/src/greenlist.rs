//! Deterministic green/red vocabulary partitioning.
//!
//! The generator and the detector both go through [`is_green`], so the two
//! sides agree token-for-token as long as they share a [`HashScheme`] and a
//! greenlist fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{splitmix64, Xorshift64Star, GOLDEN_GAMMA};

pub type TokenId = u32;

/// Token IDs `0..size`; `size` itself is the reserved sentinel context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: u32,
}

impl Vocabulary {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::param(format!("vocabulary size must be >= 2, got {size}")));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn len(&self) -> usize {
        self.size as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Context ID used before the first token. Never generatable.
    pub fn sentinel(&self) -> TokenId {
        self.size
    }

    pub fn contains(&self, token: TokenId) -> bool {
        token < self.size
    }

    /// Rejects anything outside `0..size`.
    pub fn check_token(&self, token: TokenId) -> Result<()> {
        if self.contains(token) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "token {token} out of range for vocabulary of size {}",
                self.size
            )))
        }
    }

    /// Like [`check_token`](Self::check_token) but also admits the sentinel.
    pub fn check_context(&self, token: TokenId) -> Result<()> {
        if token <= self.size {
            Ok(())
        } else {
            Err(Error::param(format!(
                "context token {token} out of range for vocabulary of size {}",
                self.size
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    /// One global partition, independent of context.
    Fixed,
    /// Partition keyed on the immediately preceding token.
    LeftHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashScheme {
    pub kind: HashKind,
    pub global_seed: u64,
}

impl HashScheme {
    pub fn fixed(global_seed: u64) -> Self {
        Self { kind: HashKind::Fixed, global_seed }
    }

    pub fn left_hash(global_seed: u64) -> Self {
        Self { kind: HashKind::LeftHash, global_seed }
    }
}

/// Seed for the partition at a position whose predecessor is `prev_token`.
pub fn derive_seed(scheme: &HashScheme, prev_token: TokenId) -> u64 {
    match scheme.kind {
        HashKind::Fixed => scheme.global_seed,
        HashKind::LeftHash => {
            splitmix64(scheme.global_seed ^ (prev_token as u64).wrapping_mul(GOLDEN_GAMMA))
        }
    }
}

/// Number of green tokens for a fraction `gamma` of `size` tokens.
///
/// `ceil`, with a 1e-9 guard so products like `0.7 * 10` do not round up to
/// an extra token.
pub fn green_list_size(gamma: f64, size: u32) -> usize {
    let raw = (gamma * size as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(size as usize)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenList {
    members: Vec<TokenId>,
    mask: Vec<bool>,
    gamma: f64,
    context_key: u64,
}

impl GreenList {
    /// Green token IDs in ascending order.
    pub fn members(&self) -> &[TokenId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn context_key(&self) -> u64 {
        self.context_key
    }

    #[inline]
    pub fn contains(&self, token: TokenId) -> bool {
        self.mask.get(token as usize).copied().unwrap_or(false)
    }

    /// Membership mask indexed by token ID.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// Full vocabulary shuffled with the generator seeded from `seed`.
pub fn shuffled_vocabulary(vocab: Vocabulary, seed: u64) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..vocab.size()).collect();
    Xorshift64Star::from_seed(seed).shuffle(&mut ids);
    ids
}

/// The first `ceil(gamma * size)` entries of the seeded shuffle are green.
pub fn partition(vocab: Vocabulary, gamma: f64, seed: u64) -> Result<GreenList> {
    check_gamma(gamma)?;
    let shuffled = shuffled_vocabulary(vocab, seed);
    let k = green_list_size(gamma, vocab.size());
    let mut mask = vec![false; vocab.len()];
    let mut members = shuffled[..k].to_vec();
    for &t in &members {
        mask[t as usize] = true;
    }
    members.sort_unstable();
    Ok(GreenList { members, mask, gamma, context_key: seed })
}

/// Green list in effect at a position whose predecessor is `prev_token`.
pub fn green_list_for(
    vocab: Vocabulary,
    scheme: &HashScheme,
    gamma: f64,
    prev_token: TokenId,
) -> Result<GreenList> {
    vocab.check_context(prev_token)?;
    partition(vocab, gamma, derive_seed(scheme, prev_token))
}

pub fn is_green(
    token: TokenId,
    prev_token: TokenId,
    scheme: &HashScheme,
    gamma: f64,
    vocab: Vocabulary,
) -> Result<bool> {
    vocab.check_token(token)?;
    Ok(green_list_for(vocab, scheme, gamma, prev_token)?.contains(token))
}
