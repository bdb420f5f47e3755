use thiserror::Error;

/// Errors raised by the planning core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("out-of-bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("map parse error: {0}")]
    MapParse(String),
    #[error("no free space: {0}")]
    NoFreeSpace(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("non-finite cost at {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
