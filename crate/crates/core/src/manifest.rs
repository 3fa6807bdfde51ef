use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What produced an artifact. Embedded in every report.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_file_hash: Option<String>,
    /// Hash of the calibrated parameters the run relied on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_hash: Option<String>,
    #[serde(default)]
    pub corpus_hashes: BTreeMap<String, String>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    /// Set when evaluation ran without calibration provenance.
    #[serde(default)]
    pub uncalibrated: bool,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` only so that
    /// identical runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: TOOL_VERSION.to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()),
            ..Default::default()
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn corpus(mut self, name: &str, hash: impl Into<String>) -> Self {
        self.corpus_hashes.insert(name.to_string(), hash.into());
        self
    }
}
