//! Watermark detection: green counting, the one-proportion z-test and the
//! WinMax window scan.

mod tokenizer;

pub use tokenizer::{SimpleTokenizer, Tokenized, TokenizerMode, VocabTable, UNK_WORD};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::greenlist::{TokenId, Vocabulary};
use crate::wmgen::{scheme_green_list, Family, WatermarkScheme};

pub const DEFAULT_MIN_TOKENS: usize = 16;
pub const DEFAULT_MIN_WINDOW: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Below this many scored tokens a text is never flagged.
    pub min_tokens: usize,
    /// Shortest window WinMax may select.
    pub min_window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { min_tokens: DEFAULT_MIN_TOKENS, min_window: DEFAULT_MIN_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub total_scored: usize,
    pub green_count: usize,
    /// Full-sequence z, or the WinMax maximum for v2. 0 when nothing was scored.
    pub z: f64,
    /// One-sided upper normal tail of `z`.
    pub p_value: f64,
    pub detected: bool,
    pub insufficient_tokens: bool,
    /// Half-open `[start, end)` window chosen by WinMax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
}

impl DetectionResult {
    /// Whether this result would be flagged at `threshold`.
    pub fn flagged_at(&self, threshold: f64) -> bool {
        !self.insufficient_tokens && self.z >= threshold
    }
}

/// Green/red flag for every token of `seq`.
///
/// Position 0 keys on `first_context` (the last prompt token, or the
/// sentinel when no prompt is known); position `i > 0` keys on `seq[i - 1]`.
pub fn green_flags(
    seq: &[TokenId],
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
    first_context: Option<TokenId>,
) -> Result<Vec<bool>> {
    let mut prev = first_context.unwrap_or(vocab.sentinel());
    vocab.check_context(prev)?;
    let mut flags = Vec::with_capacity(seq.len());
    for &tok in seq {
        vocab.check_token(tok)?;
        flags.push(scheme_green_list(scheme, vocab, prev)?.contains(tok));
        prev = tok;
    }
    Ok(flags)
}

/// `(total, green_count)` over `seq`.
pub fn count_green(
    seq: &[TokenId],
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
    first_context: Option<TokenId>,
) -> Result<(usize, usize)> {
    let flags = green_flags(seq, scheme, vocab, first_context)?;
    Ok((flags.len(), flags.iter().filter(|g| **g).count()))
}

/// One-proportion z statistic for `green_count` greens out of `total`.
pub fn z_score(green_count: usize, total: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param(format!("z-score needs gamma in (0, 1), got {gamma}")));
    }
    if total == 0 {
        return Err(Error::UndefinedScore);
    }
    if green_count > total {
        return Err(Error::param(format!("green count {green_count} exceeds total {total}")));
    }
    let n = total as f64;
    Ok((green_count as f64 - gamma * n) / (gamma * (1.0 - gamma) * n).sqrt())
}

pub fn p_value(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Maximum z over every contiguous window of length >= `min_window`.
///
/// Ties go to the earliest start, then the shortest window. Returns the
/// z value and the half-open window bounds.
pub fn winmax_over_flags(flags: &[bool], gamma: f64, min_window: usize) -> Result<(f64, (usize, usize))> {
    if min_window == 0 {
        return Err(Error::param("min_window must be >= 1"));
    }
    let n = flags.len();
    if n < min_window {
        return Err(Error::InsufficientTokens { have: n, need: min_window });
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &g in flags {
        prefix.push(prefix.last().unwrap() + g as usize);
    }
    let mut best = f64::NEG_INFINITY;
    let mut window = (0, n);
    for start in 0..=n - min_window {
        for end in start + min_window..=n {
            let z = z_score(prefix[end] - prefix[start], end - start, gamma)?;
            if z > best {
                best = z;
                window = (start, end);
            }
        }
    }
    Ok((best, window))
}

pub fn winmax_z(
    seq: &[TokenId],
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
    min_window: usize,
    first_context: Option<TokenId>,
) -> Result<(f64, (usize, usize))> {
    let flags = green_flags(seq, scheme, vocab, first_context)?;
    winmax_over_flags(&flags, scheme.gamma, min_window)
}

/// Scores precomputed green flags under `scheme`'s detection rule.
pub fn detect_flags(flags: &[bool], scheme: &WatermarkScheme, cfg: &DetectorConfig) -> Result<DetectionResult> {
    let total = flags.len();
    let green = flags.iter().filter(|g| **g).count();
    let insufficient = total < cfg.min_tokens;
    let full_z = match z_score(green, total, scheme.gamma) {
        Ok(z) => z,
        Err(Error::UndefinedScore) => 0.0,
        Err(e) => return Err(e),
    };
    let (z, window) = if scheme.family == Family::V2 && total >= cfg.min_window {
        let (z, w) = winmax_over_flags(flags, scheme.gamma, cfg.min_window)?;
        (z, Some(w))
    } else {
        (full_z, None)
    };
    let insufficient = insufficient || (scheme.family == Family::V2 && window.is_none());
    Ok(DetectionResult {
        total_scored: total,
        green_count: green,
        z,
        p_value: p_value(z),
        detected: !insufficient && z >= scheme.z_threshold,
        insufficient_tokens: insufficient,
        window,
    })
}

pub fn detect(
    seq: &[TokenId],
    scheme: &WatermarkScheme,
    vocab: Vocabulary,
    cfg: &DetectorConfig,
    first_context: Option<TokenId>,
) -> Result<DetectionResult> {
    scheme.validate()?;
    let flags = green_flags(seq, scheme, vocab, first_context)?;
    detect_flags(&flags, scheme, cfg)
}
