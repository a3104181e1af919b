use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the crowd anomaly pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing directory: {0}")]
    MissingDirectory(PathBuf),

    #[error("not a PGM file: {path}: {reason}")]
    NotPgm { path: PathBuf, reason: String },

    #[error("frame {path} is {got_width}x{got_height}, expected {width}x{height}")]
    FrameDimensions {
        path: PathBuf,
        width: usize,
        height: usize,
        got_width: usize,
        got_height: usize,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported schema_version {found} (expected {expected})")]
    Schema { expected: u32, found: u32 },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
