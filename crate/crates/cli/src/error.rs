use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Arguments that parse but cannot be honoured together.
    #[error("{0}")]
    Usage(String),

    /// The run would compare or report on parameters that were never calibrated.
    #[error("refused: {0}")]
    Refused(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] wmbench::Error),
}

impl CliError {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 usage, 3 data, 4 calibration failure or provenance refusal.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Refused(_) | CliError::Core(wmbench::Error::Calibration { .. }) => 4,
            _ => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::data("f", "bad").exit_code(), 3);
        assert_eq!(CliError::Refused("x".into()).exit_code(), 4);
        let cal = wmbench::Error::Calibration { message: "miss".into(), trace: Vec::new() };
        assert_eq!(CliError::from(cal).exit_code(), 4);
        assert_eq!(CliError::from(wmbench::Error::UndefinedScore).exit_code(), 3);
    }
}
