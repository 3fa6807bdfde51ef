use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use wmbench::detect::{detect, DetectionResult};
use wmbench::wmgen::LogitSource;
use wmbench::TokenId;

use super::{Globals, LoadedScheme};
use crate::error::{CliError, Result};
use crate::io::{emit, read_jsonl, to_jsonl};

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Scheme file whose parameters define the green lists.
    #[arg(long)]
    pub scheme: PathBuf,
    /// JSONL lines {"id", "text" or "tokens", "label"}; `generate` output works as is.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Watermarked,
    Human,
}

#[derive(Debug, Deserialize)]
struct DetectLine {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<TokenId>>,
    /// The last prompt token keys the first scored position.
    #[serde(default)]
    prompt_tokens: Option<Vec<TokenId>>,
    #[serde(default)]
    label: Option<Label>,
}

#[derive(Debug, Serialize)]
struct DetectOutput {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(flatten)]
    result: DetectionResult,
}

pub fn run(args: &DetectArgs, g: &Globals) -> Result<()> {
    let loaded = LoadedScheme::load(&args.scheme)?;
    let scheme = loaded.doc.scheme()?;
    let model = g.config.model()?;
    let vocab = model.vocab();
    let tokenizer = g.config.tokenizer()?;
    let lines: Vec<DetectLine> = read_jsonl(&args.input)?;

    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.into_iter().enumerate() {
        let id = line.id.unwrap_or_else(|| i.to_string());
        let tokens = match (line.tokens, line.text) {
            (Some(t), _) => t,
            (None, Some(text)) => {
                let tok = tokenizer.tokenize(&text).map_err(|e| CliError::data(&args.input, format!("{id}: {e}")))?;
                if !tok.unknown_words.is_empty() {
                    log::warn!("{id}: {} words mapped to the unknown id", tok.unknown_words.len());
                }
                tok.tokens
            }
            (None, None) => return Err(CliError::data(&args.input, format!("{id} has neither text nor tokens"))),
        };
        let first = line.prompt_tokens.as_ref().and_then(|p| p.last().copied());
        let result = detect(&tokens, &scheme, vocab, &g.config.detector, first)
            .map_err(|e| CliError::data(&args.input, format!("{id}: {e}")))?;
        out.push(DetectOutput { id, label: line.label, result });
    }
    log_rates(&out);
    emit(g.out.as_deref(), &to_jsonl(&out)?)
}

fn log_rates(out: &[DetectOutput]) {
    for (label, name) in [(Label::Watermarked, "TPR"), (Label::Human, "FPR")] {
        let hits: Vec<bool> = out.iter().filter(|o| o.label == Some(label)).map(|o| o.result.detected).collect();
        if !hits.is_empty() {
            let rate = hits.iter().filter(|d| **d).count() as f64 / hits.len() as f64;
            log::info!("{name} {rate:.4} over {} labelled texts", hits.len());
        }
    }
}
