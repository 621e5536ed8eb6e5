use thiserror::Error;

/// Errors raised by the localization toolkit.
#[derive(Debug, Error)]
pub enum RblError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too few observations: need {needed}, have {available}")]
    TooFewObservations { needed: usize, available: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("rank-deficient system: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, RblError>;

impl RblError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RblError::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RblError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RblError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(RblError::DimensionMismatch { expected, found });
    }
    Ok(())
}
