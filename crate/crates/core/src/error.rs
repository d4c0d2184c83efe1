use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated payload: header declares {declared} bytes, file holds {available}")]
    Truncated { declared: u64, available: u64 },

    #[error("invalid tile: {0}")]
    InvalidTile(String),

    #[error("wrong band roles: expected {expected}, found {found}")]
    BandRoles { expected: String, found: String },

    #[error("value {value} at index {index} outside allowed range [{lo}, {hi}]")]
    OutOfRange {
        value: f64,
        index: usize,
        lo: f64,
        hi: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate key: {0}")]
    Duplicate(String),

    #[error("missing or extra key: {0}")]
    KeyMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("external raster {path}: {message}")]
    External { path: PathBuf, message: String },

    #[error("malformed record at {path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
