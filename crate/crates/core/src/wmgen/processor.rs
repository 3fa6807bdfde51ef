//! Logit processors for the four watermark families.

use crate::error::{Error, Result};
use crate::greenlist::{green_list_for, GreenList, TokenId, Vocabulary};

use super::scheme::{Family, WatermarkScheme};

/// Next-token logits. Entries are finite, or `-inf` for hard-masked tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
            return Err(Error::param(format!("logit {bad} is neither finite nor a mask")));
        }
        Ok(Self(values))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_masked(&self, token: TokenId) -> bool {
        self.0[token as usize] == f64::NEG_INFINITY
    }

    /// Softmax probabilities (masked entries get 0).
    pub fn softmax(&self) -> Vec<f64> {
        softmax(&self.0)
    }
}

pub(crate) fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; values.len()];
    }
    let mut out: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Masks every red token so only green ones remain sampleable.
pub fn apply_hard(mut logits: LogitVector, green: &GreenList) -> Result<LogitVector> {
    if green.is_empty() {
        return Err(Error::Invariant("hard watermark with an empty green list".into()));
    }
    for (v, &is_green) in logits.0.iter_mut().zip(green.mask()) {
        if !is_green {
            *v = f64::NEG_INFINITY;
        }
    }
    if logits.0.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::Invariant("hard watermark masked every token".into()));
    }
    Ok(logits)
}

/// Adds `delta` to every green logit.
pub fn apply_soft(mut logits: LogitVector, green: &GreenList, delta: f64) -> Result<LogitVector> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param(format!("delta must be finite and >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(logits);
    }
    for (v, &is_green) in logits.0.iter_mut().zip(green.mask()) {
        if is_green {
            *v += delta;
        }
    }
    Ok(logits)
}

/// Green list the scheme puts in effect after `prev_token`.
pub fn scheme_green_list(
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
    prev_token: TokenId,
) -> Result<GreenList> {
    green_list_for(vocab, &scheme.hash, scheme.gamma, prev_token)
}

/// Applies the scheme's processor, given the green list for this position.
pub(crate) fn apply_with_list(
    logits: LogitVector,
    scheme: &WatermarkScheme,
    green: &GreenList,
) -> Result<LogitVector> {
    match scheme.family {
        Family::None => Ok(logits),
        Family::Hard => apply_hard(logits, green),
        Family::Soft | Family::V2 | Family::Gpt => apply_soft(logits, green, scheme.delta),
    }
}

pub fn apply_scheme(
    logits: LogitVector,
    prev_token: TokenId,
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
) -> Result<LogitVector> {
    scheme.validate()?;
    if logits.len() != vocab.len() {
        return Err(Error::param(format!(
            "logit vector has {} entries, vocabulary has {}",
            logits.len(),
            vocab.len()
        )));
    }
    if scheme.family == Family::None {
        return Ok(logits);
    }
    let green = scheme_green_list(scheme, vocab, prev_token)?;
    apply_with_list(logits, scheme, &green)
}
