use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] sar2rgb_core::Error),
    #[error(transparent)]
    Model(#[from] sar2rgb_sargen::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite {what} at step {step}")]
    NonFinite { step: u64, what: &'static str },
    #[error("checkpoint format version {found} is not supported (this build reads {supported})")]
    Version { found: u32, supported: u32 },
    #[error("checkpoint checksum mismatch{}", section.as_ref().map(|s| format!(" in section {s}")).unwrap_or_default())]
    Checksum { section: Option<String> },
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
