use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use wmbench::rng::stream_seed;
use wmbench::wmgen::{generate, timed_generate, Family, WatermarkScheme};
use wmbench::TokenId;

use super::{load_prompts, Globals, LoadedScheme};
use crate::error::Result;
use crate::io::{emit, to_jsonl};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scheme file, or `none` for unwatermarked output.
    #[arg(long)]
    pub scheme: String,
    /// JSONL prompts: {"id", "prompt"} or {"id", "tokens"}.
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_new_tokens: Option<u64>,
    /// Record wall-clock seconds per emitted token (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLine {
    pub id: String,
    pub family: Family,
    pub prompt_tokens: Vec<TokenId>,
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub green_flags: Vec<bool>,
    pub green_count: usize,
    pub stopped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds_per_token: Option<f64>,
}

pub fn run(args: &GenerateArgs, g: &Globals) -> Result<()> {
    let loaded = LoadedScheme::from_arg(&args.scheme)?;
    let (scheme, sampler) = match &loaded {
        Some(l) => (l.doc.scheme()?, l.doc.sampler()?),
        None => (WatermarkScheme::unwatermarked(0.5, 0)?, g.config.sampler),
    };
    let seed = g.seed.unwrap_or(sampler.rng_seed);
    let model = g.config.model()?;
    let tokenizer = g.config.tokenizer()?;
    let prompts = load_prompts(&args.prompts, &tokenizer)?;
    let max_new = g.config.max_new_tokens(args.max_new_tokens);

    let mut lines = Vec::with_capacity(prompts.len());
    for (i, p) in prompts.iter().enumerate() {
        let cfg = sampler.with_seed(stream_seed(seed, i as u64));
        let (rec, per_token) = if args.timing {
            match timed_generate(&model, &p.tokens, &scheme, &cfg, max_new, g.config.stop_token) {
                Ok((rec, t)) => (rec, Some(t)),
                Err(wmbench::Error::Measurement(msg)) => {
                    log::warn!("prompt {}: {msg}", p.id);
                    (generate(&model, &p.tokens, &scheme, &cfg, max_new, g.config.stop_token)?, None)
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            (generate(&model, &p.tokens, &scheme, &cfg, max_new, g.config.stop_token)?, None)
        };
        lines.push(GenerationLine {
            id: p.id.clone(),
            family: scheme.family,
            text: tokenizer.detokenize(&rec.output)?,
            green_count: rec.green_count(),
            prompt_tokens: rec.prompt,
            tokens: rec.output,
            green_flags: rec.green_flags,
            stopped: rec.stopped,
            seconds_per_token: per_token,
        });
    }
    log::info!("generated {} outputs with family {}", lines.len(), scheme.family);
    emit(g.out.as_deref(), &to_jsonl(&lines)?)
}
