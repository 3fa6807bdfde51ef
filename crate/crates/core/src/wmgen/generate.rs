use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greenlist::{TokenId, Vocabulary};

use super::processor::{apply_with_list, scheme_green_list, LogitVector};
use super::sampler::sample;
use super::scheme::{SamplerConfig, WatermarkScheme};

/// Anything that can score the next token given the full context so far.
pub trait LogitSource: Sync {
    fn vocab(&self) -> Vocabulary;
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector>;
}

impl<S: LogitSource + ?Sized> LogitSource for &S {
    fn vocab(&self) -> Vocabulary {
        (**self).vocab()
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        (**self).next_logits(context)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: Vec<TokenId>,
    /// Emitted tokens; the stop token, if hit, is not included.
    pub output: Vec<TokenId>,
    pub green_flags: Vec<bool>,
    pub scheme: WatermarkScheme,
    pub stopped: bool,
}

impl GenerationRecord {
    pub fn green_count(&self) -> usize {
        self.green_flags.iter().filter(|g| **g).count()
    }

    /// Context token for scoring position 0 of the output.
    pub fn first_context(&self, vocab: Vocabulary) -> TokenId {
        self.prompt.last().copied().unwrap_or(vocab.sentinel())
    }
}

pub fn generate<S: LogitSource + ?Sized>(
    source: &S,
    prompt: &[TokenId],
    scheme: &WatermarkScheme,
    cfg: &SamplerConfig,
    max_new_tokens: usize,
    stop_token: Option<TokenId>,
) -> Result<GenerationRecord> {
    if max_new_tokens == 0 {
        return Err(Error::param("max_new_tokens must be >= 1"));
    }
    scheme.validate()?;
    cfg.validate()?;
    let vocab = source.vocab();
    for &t in prompt {
        vocab.check_token(t)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut context = Vec::with_capacity(prompt.len() + max_new_tokens);
    context.extend_from_slice(prompt);
    let mut output = Vec::with_capacity(max_new_tokens);
    let mut green_flags = Vec::with_capacity(max_new_tokens);
    let mut stopped = false;

    for _ in 0..max_new_tokens {
        let logits = source.next_logits(&context)?;
        if logits.len() != vocab.len() {
            return Err(Error::Source(format!(
                "source returned {} logits for a vocabulary of {}",
                logits.len(),
                vocab.len()
            )));
        }
        let prev = context.last().copied().unwrap_or(vocab.sentinel());
        let green = scheme_green_list(scheme, vocab, prev)?;
        let processed = apply_with_list(logits, scheme, &green)?;
        let token = sample(&processed, cfg, &mut rng)?;
        if stop_token == Some(token) {
            stopped = true;
            break;
        }
        green_flags.push(green.contains(token));
        output.push(token);
        context.push(token);
    }

    Ok(GenerationRecord {
        prompt: prompt.to_vec(),
        output,
        green_flags,
        scheme: *scheme,
        stopped,
    })
}

/// [`generate`] plus wall-clock seconds per emitted token.
pub fn timed_generate<S: LogitSource + ?Sized>(
    source: &S,
    prompt: &[TokenId],
    scheme: &WatermarkScheme,
    cfg: &SamplerConfig,
    max_new_tokens: usize,
    stop_token: Option<TokenId>,
) -> Result<(GenerationRecord, f64)> {
    let start = Instant::now();
    let record = generate(source, prompt, scheme, cfg, max_new_tokens, stop_token)?;
    let elapsed = start.elapsed().as_secs_f64();
    if record.output.is_empty() {
        return Err(Error::Measurement("no tokens emitted; seconds per token is undefined".into()));
    }
    // Clock granularity can report zero for very short runs.
    let per_token = (elapsed / record.output.len() as f64).max(f64::MIN_POSITIVE);
    Ok((record, per_token))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenlist::is_green;
    use crate::wmgen::scheme::Family;

    /// Uniform source over `n` tokens.
    struct Flat(Vocabulary);

    impl LogitSource for Flat {
        fn vocab(&self) -> Vocabulary {
            self.0
        }
        fn next_logits(&self, _: &[TokenId]) -> Result<LogitVector> {
            Ok(LogitVector::uniform(self.0.len()))
        }
    }

    /// Always proposes the same single token.
    struct Stuck(Vocabulary, TokenId);

    impl LogitSource for Stuck {
        fn vocab(&self) -> Vocabulary {
            self.0
        }
        fn next_logits(&self, _: &[TokenId]) -> Result<LogitVector> {
            let mut v = vec![-1e9; self.0.len()];
            v[self.1 as usize] = 0.0;
            LogitVector::new(v)
        }
    }

    struct Broken;

    impl LogitSource for Broken {
        fn vocab(&self) -> Vocabulary {
            Vocabulary::new(4).unwrap()
        }
        fn next_logits(&self, _: &[TokenId]) -> Result<LogitVector> {
            Err(Error::Source("offline".into()))
        }
    }

    fn flat(n: u32) -> Flat {
        Flat(Vocabulary::new(n).unwrap())
    }

    #[test]
    fn hard_watermark_emits_only_green() {
        let src = flat(500);
        let scheme = WatermarkScheme::new(Family::Hard, 0.25, 0.0, 17).unwrap();
        let rec = generate(&src, &[1, 2], &scheme, &SamplerConfig::default(), 200, None).unwrap();
        assert_eq!(rec.output.len(), 200);
        assert!(rec.green_flags.iter().all(|g| *g));
    }

    #[test]
    fn unwatermarked_green_fraction_matches_gamma() {
        let src = flat(1000);
        let scheme = WatermarkScheme::unwatermarked(0.25, 99).unwrap();
        let mut green = 0;
        let mut total = 0;
        for seed in 0..50 {
            let cfg = SamplerConfig::default().with_seed(seed);
            let rec = generate(&src, &[], &scheme, &cfg, 200, None).unwrap();
            green += rec.green_count();
            total += rec.output.len();
        }
        let frac = green as f64 / total as f64;
        assert_eq!(total, 10_000);
        assert!((frac - 0.25).abs() <= 0.02, "green fraction {frac}");
    }

    #[test]
    fn flags_match_independent_recomputation() {
        let src = flat(300);
        let vocab = src.vocab();
        let scheme = WatermarkScheme::new(Family::Soft, 0.3, 1.5, 4).unwrap();
        let rec = generate(&src, &[5], &scheme, &SamplerConfig::default(), 64, None).unwrap();
        let mut prev = 5;
        for (&t, &flag) in rec.output.iter().zip(&rec.green_flags) {
            assert_eq!(flag, is_green(t, prev, &scheme.hash, scheme.gamma, vocab).unwrap());
            prev = t;
        }
    }

    #[test]
    fn same_seed_same_output() {
        let src = flat(200);
        let scheme = WatermarkScheme::new(Family::V2, 0.25, 2.0, 3).unwrap();
        let cfg = SamplerConfig::default().with_seed(12);
        let a = generate(&src, &[1], &scheme, &cfg, 50, None).unwrap();
        let b = generate(&src, &[1], &scheme, &cfg, 50, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stop_token_is_not_emitted() {
        let src = Stuck(Vocabulary::new(10).unwrap(), 3);
        let scheme = WatermarkScheme::unwatermarked(0.5, 1).unwrap();
        let rec = generate(&src, &[0], &scheme, &SamplerConfig::default(), 5, Some(3)).unwrap();
        assert!(rec.stopped);
        assert!(rec.output.is_empty() && rec.green_flags.is_empty());

        let timed = timed_generate(&src, &[0], &scheme, &SamplerConfig::default(), 5, Some(3));
        assert!(matches!(timed, Err(Error::Measurement(_))));
    }

    #[test]
    fn errors_propagate() {
        let scheme = WatermarkScheme::unwatermarked(0.5, 1).unwrap();
        assert!(matches!(
            generate(&Broken, &[], &scheme, &SamplerConfig::default(), 3, None),
            Err(Error::Source(_))
        ));
        assert!(generate(&flat(8), &[], &scheme, &SamplerConfig::default(), 0, None).is_err());
        assert!(generate(&flat(8), &[8], &scheme, &SamplerConfig::default(), 1, None).is_err());
    }

    #[test]
    fn timing_is_positive() {
        let scheme = WatermarkScheme::new(Family::Soft, 0.25, 2.0, 1).unwrap();
        let (rec, spt) = timed_generate(&flat(100), &[], &scheme, &SamplerConfig::default(), 20, None).unwrap();
        assert_eq!(rec.output.len(), 20);
        assert!(spt > 0.0);
    }
}
