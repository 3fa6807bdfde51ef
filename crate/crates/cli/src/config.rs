use std::path::{Path, PathBuf};

use serde::Deserialize;
use wmbench::detect::{DetectorConfig, SimpleTokenizer, TokenizerMode, VocabTable};
use wmbench::judge::JudgeEndpoint;
use wmbench::toy_lm::{ToyLm, ToyLmConfig};
use wmbench::wmgen::SamplerConfig;
use wmbench::TokenId;

use crate::error::{CliError, Result};
use crate::io::read_bytes;

pub const DEFAULT_MAX_NEW_TOKENS: usize = 200;

/// Settings shared by every subcommand, loaded from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ToyLmConfig,
    /// Used for unwatermarked runs and as the starting point for calibration.
    pub sampler: SamplerConfig,
    pub detector: DetectorConfig,
    pub tokenizer: TokenizerConfig,
    pub max_new_tokens: Option<usize>,
    pub stop_token: Option<TokenId>,
    pub judge: Option<JudgeConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    /// JSON `{"word": id}` table; relative paths resolve against the config file.
    pub vocab_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub rate_limit_per_sec: Option<f64>,
}

impl JudgeConfig {
    pub fn endpoint(&self) -> JudgeEndpoint {
        let mut ep = JudgeEndpoint::new(&self.base_url, &self.model);
        ep.timeout_secs = self.timeout_secs.unwrap_or(ep.timeout_secs);
        ep.max_retries = self.max_retries.unwrap_or(ep.max_retries);
        ep.backoff_ms = self.backoff_ms.unwrap_or(ep.backoff_ms);
        ep.rate_limit_per_sec = self.rate_limit_per_sec.unwrap_or(ep.rate_limit_per_sec);
        ep
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let mut cfg: RunConfig =
            serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::data(path, e.to_string()))?;
        if let Some(vf) = &cfg.tokenizer.vocab_file {
            if vf.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.tokenizer.vocab_file = Some(base.join(vf));
            }
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ToyLm> {
        Ok(ToyLm::new(self.model)?)
    }

    pub fn tokenizer(&self) -> Result<SimpleTokenizer> {
        let table = match (&self.tokenizer.mode, &self.tokenizer.vocab_file) {
            (TokenizerMode::IdentityIntegers, _) => None,
            (TokenizerMode::WhitespaceVocab, None) => {
                return Err(CliError::Usage("whitespace_vocab tokenizer needs tokenizer.vocab_file".into()))
            }
            (TokenizerMode::WhitespaceVocab, Some(path)) => {
                let table = VocabTable::load(path).map_err(|e| CliError::data(path, e.to_string()))?;
                if table.required_vocab_size() > self.model.vocab_size {
                    return Err(CliError::data(
                        path,
                        format!(
                            "table needs {} ids but the model vocabulary has {}",
                            table.required_vocab_size(),
                            self.model.vocab_size
                        ),
                    ));
                }
                Some(table)
            }
        };
        Ok(SimpleTokenizer::new(self.tokenizer.mode, table)?)
    }

    /// Flag value if given, else the config value, else the default.
    pub fn max_new_tokens(&self, flag: Option<u64>) -> usize {
        flag.map(|v| v as usize).or(self.max_new_tokens).unwrap_or(DEFAULT_MAX_NEW_TOKENS)
    }
}
