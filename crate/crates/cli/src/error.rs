use std::path::Path;

use ptfc::error::PtfcError;
use thiserror::Error;

/// CLI failure, split by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed input files or arguments the library rejects.
    #[error("{0}")]
    Validation(String),
    /// Everything else: I/O, numerical breakdowns during estimation.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub(crate) fn format(source: &str, e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Runtime(format!("{source}: {e}")),
            _ => CliError::Validation(format!("{source}: {e}")),
        }
    }
}

impl From<PtfcError> for CliError {
    fn from(e: PtfcError) -> Self {
        match e {
            PtfcError::InvalidArgument(_) | PtfcError::EmptyBand { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("serialization failed: {e}"))
    }
}
