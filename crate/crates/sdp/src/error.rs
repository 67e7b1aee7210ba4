use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
