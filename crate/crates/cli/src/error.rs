/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation: exit 1.
    #[error("{0}")]
    Usage(String),
    /// Invalid or inconsistent input data or configuration: exit 2.
    #[error("{0}")]
    Data(String),
    /// Failure while running, such as a diverging loss or an unwritable output: exit 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<sar2rgb_core::Error> for CliError {
    fn from(e: sar2rgb_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sar2rgb_sargen::Error> for CliError {
    fn from(e: sar2rgb_sargen::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sar2rgb_trainer::Error> for CliError {
    fn from(e: sar2rgb_trainer::Error) -> Self {
        match e {
            sar2rgb_trainer::Error::NonFinite { .. } => CliError::Runtime(e.to_string()),
            sar2rgb_trainer::Error::Data(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
