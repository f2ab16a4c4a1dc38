use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("line fit needs at least 2 points below {bound} AU, found {found}")]
    Fit { bound: f64, found: usize },

    #[error("model file: {0}")]
    Load(#[from] LoadError),

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (parameter norm {parameter_norm:e})"
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        parameter_norm: f64,
    },

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("no candidate is scorable on every selected criterion")]
    NoCandidate,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("config hash mismatch: header says {stored:016x}, config hashes to {computed:016x}")]
    ConfigHash { stored: u64, computed: u64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
