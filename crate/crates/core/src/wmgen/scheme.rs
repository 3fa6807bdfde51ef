use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::greenlist::{check_gamma, HashKind, HashScheme};

/// Conventional detection threshold for green-list watermarks.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    None,
    Hard,
    Soft,
    Gpt,
    V2,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::None, Family::Hard, Family::Soft, Family::Gpt, Family::V2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::None => "none",
            Family::Hard => "hard",
            Family::Soft => "soft",
            Family::Gpt => "gpt",
            Family::V2 => "v2",
        }
    }

    /// Hashing mandated by the family (`None` is hash-agnostic).
    pub fn required_hash(&self) -> Option<HashKind> {
        match self {
            Family::None => None,
            Family::Gpt => Some(HashKind::Fixed),
            Family::Hard | Family::Soft | Family::V2 => Some(HashKind::LeftHash),
        }
    }

    pub fn uses_delta(&self) -> bool {
        matches!(self, Family::Soft | Family::Gpt | Family::V2)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Family::None),
            "hard" => Ok(Family::Hard),
            "soft" => Ok(Family::Soft),
            "gpt" => Ok(Family::Gpt),
            "v2" => Ok(Family::V2),
            other => Err(Error::param(format!("unknown watermark family '{other}'"))),
        }
    }
}

/// Everything the generator and the detector must share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkScheme {
    pub family: Family,
    pub gamma: f64,
    pub delta: f64,
    pub hash: HashScheme,
    pub z_threshold: f64,
}

impl WatermarkScheme {
    /// Builds a scheme with the hash kind the family requires (LeftHash for `None`).
    pub fn new(family: Family, gamma: f64, delta: f64, global_seed: u64) -> Result<Self> {
        let kind = family.required_hash().unwrap_or(HashKind::LeftHash);
        let scheme = Self {
            family,
            gamma,
            delta,
            hash: HashScheme { kind, global_seed },
            z_threshold: DEFAULT_Z_THRESHOLD,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn with_threshold(mut self, z_threshold: f64) -> Self {
        self.z_threshold = z_threshold;
        self
    }

    pub fn unwatermarked(gamma: f64, global_seed: u64) -> Result<Self> {
        Self::new(Family::None, gamma, 0.0, global_seed)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        if !self.z_threshold.is_finite() {
            return Err(Error::config("z_threshold must be finite"));
        }
        if let Some(kind) = self.family.required_hash() {
            if kind != self.hash.kind {
                return Err(Error::config(format!(
                    "{} watermark requires {:?} hashing, got {:?}",
                    self.family, kind, self.hash.kind
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_p: f64,
    /// 0 disables top-k filtering.
    pub top_k: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { temperature: 0.7, top_p: 0.9, top_k: 0, rng_seed: 0 }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::config(format!("top_p must lie in (0, 1], got {}", self.top_p)));
        }
        Ok(())
    }
}

/// Calibration provenance stamped into a frozen scheme file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Hash of the scheme parameters at the time they were frozen.
    pub scheme_hash: String,
    pub target_tpr: f64,
    pub achieved_tpr: f64,
    /// Hash of the calibration corpus.
    pub corpus_hash: String,
}

/// On-disk scheme + sampler document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub family: Family,
    pub gamma: f64,
    pub delta: f64,
    pub hash_kind: HashKind,
    pub global_seed: u64,
    pub z_threshold: f64,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: usize,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SchemeDocument {
    pub fn new(scheme: &WatermarkScheme, sampler: &SamplerConfig) -> Self {
        Self {
            family: scheme.family,
            gamma: scheme.gamma,
            delta: scheme.delta,
            hash_kind: scheme.hash.kind,
            global_seed: scheme.hash.global_seed,
            z_threshold: scheme.z_threshold,
            temperature: sampler.temperature,
            top_p: sampler.top_p,
            top_k: sampler.top_k,
            rng_seed: sampler.rng_seed,
            provenance: None,
        }
    }

    pub fn scheme(&self) -> Result<WatermarkScheme> {
        let scheme = WatermarkScheme {
            family: self.family,
            gamma: self.gamma,
            delta: self.delta,
            hash: HashScheme { kind: self.hash_kind, global_seed: self.global_seed },
            z_threshold: self.z_threshold,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let cfg = SamplerConfig {
            temperature: self.temperature,
            top_p: self.top_p,
            top_k: self.top_k,
            rng_seed: self.rng_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the parameter fields (provenance excluded), hex encoded.
    pub fn scheme_hash(&self) -> String {
        let mut bare = self.clone();
        bare.provenance = None;
        let canonical = serde_json::to_vec(&bare).expect("scheme document serializes");
        hex_digest(&canonical)
    }

    /// True when the embedded provenance was issued for exactly these parameters.
    pub fn provenance_matches(&self) -> bool {
        self.provenance.as_ref().is_some_and(|p| p.scheme_hash == self.scheme_hash())
    }
}

/// Lowercase hex SHA-256.
pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
