//! Temperature, top-k and nucleus sampling.
//!
//! Pipeline order: temperature scaling, top-k filter, top-p filter,
//! renormalise, multinomial draw. Watermark bias is applied by the caller
//! before any of this.

use rand::Rng;

use crate::error::{Error, Result};
use crate::greenlist::TokenId;

use super::processor::LogitVector;
use super::scheme::SamplerConfig;

/// Rank key: ascending key order is value descending, then slot ascending.
fn rank_key(slot: usize, v: f64) -> u128 {
    // Unsigned order of `asc` matches `f64::total_cmp`.
    let bits = v.to_bits();
    let asc = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
    ((!asc as u128) << 64) | slot as u128
}

fn slot_of(key: u128) -> usize {
    key as u64 as usize
}

/// Number of top-ranked entries needed for their mass to reach `top_p`.
///
/// Weighted quickselect: expected linear time, no full sort. On return
/// `keys[..m]` holds exactly the `m` best-ranked entries, in no particular order.
fn nucleus_len(keys: &mut [u128], probs: &[f64], top_p: f64) -> usize {
    let (mut lo, mut hi) = (0, keys.len());
    // Mass of keys[..lo], all of which outrank keys[lo..].
    let mut acc = 0.0;
    while hi - lo > 16 {
        let mid = lo + (hi - lo) / 2;
        keys[lo..hi].select_nth_unstable(mid - lo);
        let left: f64 = keys[lo..mid].iter().map(|&k| probs[slot_of(k)]).sum();
        if acc + left >= top_p {
            hi = mid;
        } else {
            acc += left;
            lo = mid;
        }
    }
    keys[lo..hi].sort_unstable();
    for (i, &k) in keys[lo..hi].iter().enumerate() {
        acc += probs[slot_of(k)];
        if acc >= top_p {
            return lo + i + 1;
        }
    }
    // Rounding left the total just under top_p: keep everything.
    hi
}

/// Tokens that survive filtering, with their renormalised probabilities, in
/// ascending token order.
pub fn filtered_distribution(logits: &LogitVector, cfg: &SamplerConfig) -> Result<Vec<(TokenId, f64)>> {
    cfg.validate()?;
    let inv_t = 1.0 / cfg.temperature;
    let cands: Vec<(usize, f64)> = logits
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != f64::NEG_INFINITY)
        .map(|(i, &v)| (i, v * inv_t))
        .collect();
    if cands.is_empty() {
        return Err(Error::NoSampleableToken);
    }

    let mut keys: Vec<u128> = cands.iter().enumerate().map(|(slot, c)| rank_key(slot, c.1)).collect();
    if cfg.top_k > 0 && cfg.top_k < keys.len() {
        keys.select_nth_unstable(cfg.top_k - 1);
        keys.truncate(cfg.top_k);
    }

    let max = keys.iter().map(|&k| cands[slot_of(k)].1).fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; cands.len()];
    let mut sum = 0.0;
    for &k in &keys {
        let e = (cands[slot_of(k)].1 - max).exp();
        probs[slot_of(k)] = e;
        sum += e;
    }
    for &k in &keys {
        probs[slot_of(k)] /= sum;
    }

    if cfg.top_p < 1.0 {
        let m = nucleus_len(&mut keys, &probs, cfg.top_p);
        keys.truncate(m);
    }
    let mut kept = vec![false; cands.len()];
    for &k in &keys {
        kept[slot_of(k)] = true;
    }
    let mass: f64 = keys.iter().map(|&k| probs[slot_of(k)]).sum();
    Ok(cands
        .iter()
        .zip(kept)
        .zip(&probs)
        .filter(|(( _, keep), _)| *keep)
        .map(|((c, _), &p)| (c.0 as TokenId, p / mass))
        .collect())
}

pub fn sample<R: Rng + ?Sized>(logits: &LogitVector, cfg: &SamplerConfig, rng: &mut R) -> Result<TokenId> {
    let dist = filtered_distribution(logits, cfg)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for &(token, p) in &dist {
        cum += p;
        if u < cum {
            return Ok(token);
        }
    }
    Ok(dist.last().map(|d| d.0).expect("distribution is nonempty"))
}
