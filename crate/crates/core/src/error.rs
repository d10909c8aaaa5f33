use thiserror::Error;

/// Errors raised by the allocation, simulation and prediction layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs whose shapes disagree (lengths, dimensions, duplicate ids).
    #[error("structural error: {0}")]
    Structural(String),

    /// A configuration value outside its valid range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A metric was requested without the ground truth it needs.
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    /// A documented precondition does not hold (e.g. SER with a single row).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
