use crate::geometry::Point;

/// Errors raised by the numerical library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {context} at ({}, {})", .at.x, .at.y)]
    NonFinite { context: String, at: Point },

    #[error("hypothesis screen failed: {what} (witness at ({}, {}))", .witness.x, .witness.y)]
    HypothesisViolated { what: String, witness: Point },

    #[error("classically allowed region is empty")]
    EmptyRegion,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
