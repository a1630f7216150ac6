use thiserror::Error;

/// Errors raised by construction, evaluation and IO.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions or layer shapes do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Input data is non-finite, discontinuous or otherwise invalid.
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn structural<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Structural(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn data<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Data(msg.into()))
}
