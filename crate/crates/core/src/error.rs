use std::path::PathBuf;

/// Errors raised across the tracking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported result-log version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("missing ground truth for sequence at {0}")]
    MissingGroundTruth(PathBuf),

    #[error("log/sequence mismatch for sequence `{name}`: {message}")]
    SequenceMismatch { name: String, message: String },

    #[error("image decode failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
