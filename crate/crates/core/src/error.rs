use thiserror::Error;

use crate::calibrate::TraceEntry;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no sampleable token: every logit is masked")]
    NoSampleableToken,

    #[error("z-score undefined for an empty scored region")]
    UndefinedScore,

    #[error("insufficient tokens: have {have}, need {need}")]
    InsufficientTokens { have: usize, need: usize },

    #[error("logit source failure: {0}")]
    Source(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("calibration failed: {message}")]
    Calibration {
        message: String,
        trace: Vec<TraceEntry>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("judge failure: {0}")]
    Judge(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
