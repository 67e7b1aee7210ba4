use thiserror::Error;

use crate::algebra::Word;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric failure: {message} (error estimate {estimate:e})")]
    NumericFailure { message: String, estimate: f64 },
    #[error("word {0} is not in the span of the moment matrix")]
    MissingWord(Word),
    #[error(transparent)]
    Sdp(#[from] dibound_sdp::SdpError),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
