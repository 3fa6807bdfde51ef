pub mod calibrate;
pub mod detect;
pub mod evaluate;
pub mod generate;
pub mod judge;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use wmbench::detect::SimpleTokenizer;
use wmbench::judge::{HttpJudge, Judge, MockJudge, OrderPolicy};
use wmbench::wmgen::{hex_digest, SchemeDocument};
use wmbench::TokenId;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::read_bytes;

/// Options every subcommand receives.
pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub config: RunConfig,
}

/// A scheme file as loaded from disk, with the hash of its raw bytes.
pub struct LoadedScheme {
    pub doc: SchemeDocument,
    pub file_hash: String,
}

impl LoadedScheme {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let doc: SchemeDocument = serde_json::from_slice(&bytes).map_err(|e| CliError::data(path, e.to_string()))?;
        doc.scheme().map_err(|e| CliError::data(path, e.to_string()))?;
        doc.sampler().map_err(|e| CliError::data(path, e.to_string()))?;
        Ok(LoadedScheme { doc, file_hash: hex_digest(&bytes) })
    }

    /// `none` selects an unwatermarked run.
    pub fn from_arg(arg: &str) -> Result<Option<Self>> {
        if arg.eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            Self::load(Path::new(arg)).map(Some)
        }
    }
}

/// Prompt corpus line. Task files are accepted too: `input` reads as `prompt`.
#[derive(Debug, Deserialize)]
pub struct PromptLine {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default, alias = "input")]
    pub prompt: Option<String>,
    #[serde(default)]
    pub tokens: Option<Vec<TokenId>>,
}

pub struct Prompt {
    pub id: String,
    pub tokens: Vec<TokenId>,
}

pub fn load_prompts(path: &Path, tokenizer: &SimpleTokenizer) -> Result<Vec<Prompt>> {
    let lines: Vec<PromptLine> = crate::io::read_jsonl(path)?;
    if lines.is_empty() {
        return Err(CliError::data(path, "no prompts"));
    }
    lines
        .into_iter()
        .enumerate()
        .map(|(i, line)| {
            let id = line.id.unwrap_or_else(|| i.to_string());
            let tokens = match (line.tokens, line.prompt) {
                (Some(t), _) => t,
                (None, Some(text)) => {
                    tokenizer.tokenize(&text).map_err(|e| CliError::data(path, format!("prompt {id}: {e}")))?.tokens
                }
                (None, None) => return Err(CliError::data(path, format!("prompt {id} has neither prompt nor tokens"))),
            };
            Ok(Prompt { id, tokens })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OrderArg {
    /// Coin flip per pair.
    #[default]
    Random,
    /// Ours always shown first.
    Ab,
    /// Baseline always shown first.
    Ba,
}

impl From<OrderArg> for OrderPolicy {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Random => OrderPolicy::Random,
            OrderArg::Ab => OrderPolicy::ForcedAB,
            OrderArg::Ba => OrderPolicy::ForcedBA,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct JudgeArgs {
    /// Use the offline judge that prefers the longer output.
    #[arg(long, conflicts_with = "endpoint")]
    pub mock: bool,
    /// Chat-completion base URL; the key is read from WMBENCH_JUDGE_API_KEY.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to --endpoint.
    #[arg(long, requires = "endpoint")]
    pub judge_model: Option<String>,
}

impl JudgeArgs {
    /// Flags first, then the config file; `None` when no judge is configured.
    pub fn build(&self, cfg: &RunConfig) -> Result<Option<Box<dyn Judge>>> {
        if self.mock {
            return Ok(Some(Box::new(MockJudge)));
        }
        let endpoint = match (&self.endpoint, &cfg.judge) {
            (Some(url), file) => {
                let mut ep = file.as_ref().map(|j| j.endpoint()).unwrap_or_else(|| {
                    wmbench::judge::JudgeEndpoint::new(url.clone(), String::new())
                });
                ep.base_url = url.clone();
                if let Some(m) = &self.judge_model {
                    ep.model = m.clone();
                }
                ep
            }
            (None, Some(file)) => file.endpoint(),
            (None, None) => return Ok(None),
        };
        if endpoint.model.is_empty() {
            return Err(CliError::Usage("--endpoint needs --judge-model or judge.model in the config".into()));
        }
        Ok(Some(Box::new(HttpJudge::new(endpoint)?)))
    }
}
