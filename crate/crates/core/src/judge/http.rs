//! OpenAI-compatible chat-completions judge over HTTP.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Judge, JudgeRequest};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token. The key is never logged.
pub const API_KEY_ENV: &str = "WMBENCH_JUDGE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeEndpoint {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Initial retry back-off; doubles on each attempt.
    pub backoff_ms: u64,
    /// Requests per second across all threads; 0 disables the limit.
    pub rate_limit_per_sec: f64,
}

impl JudgeEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        JudgeEndpoint {
            base_url: base_url.into(),
            model: model.into(),
            timeout_secs: 60,
            max_retries: 3,
            backoff_ms: 500,
            rate_limit_per_sec: 0.0,
        }
    }
}

pub struct HttpJudge {
    endpoint: JudgeEndpoint,
    api_key: Option<String>,
    agent: ureq::Agent,
    next_slot: Mutex<Instant>,
}

impl std::fmt::Debug for HttpJudge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpJudge")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: String,
}

impl HttpJudge {
    /// Reads the API key from [`API_KEY_ENV`] if set.
    pub fn new(endpoint: JudgeEndpoint) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(endpoint, key)
    }

    pub fn with_key(endpoint: JudgeEndpoint, api_key: Option<String>) -> Result<Self> {
        if endpoint.base_url.trim().is_empty() || endpoint.model.trim().is_empty() {
            return Err(Error::config("judge endpoint needs a base url and a model"));
        }
        if endpoint.timeout_secs == 0 {
            return Err(Error::config("judge timeout must be positive"));
        }
        if !endpoint.rate_limit_per_sec.is_finite() || endpoint.rate_limit_per_sec < 0.0 {
            return Err(Error::config("judge rate limit must be a finite non-negative number"));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build()
            .into();
        Ok(HttpJudge { endpoint, api_key, agent, next_slot: Mutex::new(Instant::now()) })
    }

    fn wait_for_slot(&self) {
        if self.endpoint.rate_limit_per_sec <= 0.0 {
            return;
        }
        let interval = Duration::from_secs_f64(1.0 / self.endpoint.rate_limit_per_sec);
        let wake = {
            let mut next = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot
        };
        let now = Instant::now();
        if wake > now {
            std::thread::sleep(wake - now);
        }
    }

    fn call_once(&self, prompt: &str) -> std::result::Result<String, ureq::Error> {
        self.wait_for_slot();
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.endpoint.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let completion: Completion = req.send_json(&body)?.body_mut().read_json()?;
        Ok(completion.choices.into_iter().next().map(|c| c.message.content).unwrap_or_default())
    }
}

fn retryable(e: &ureq::Error) -> bool {
    match e {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        ureq::Error::Json(_) => false,
        _ => true,
    }
}

impl Judge for HttpJudge {
    fn respond(&self, request: &JudgeRequest<'_>) -> Result<String> {
        let mut backoff = Duration::from_millis(self.endpoint.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.call_once(&request.prompt) {
                Ok(text) => return Ok(text),
                Err(e) if attempt < self.endpoint.max_retries && retryable(&e) => {
                    log::warn!("judge call failed ({e}); retry {} of {}", attempt + 1, self.endpoint.max_retries);
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(Error::Judge(format!("judge request failed after {} attempt(s): {e}", attempt + 1))),
            }
        }
    }
}
