use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("collision: {0}")]
    Collision(String),
    #[error(transparent)]
    Core(#[from] itrack_core::Error),
}

pub type SimResult<T> = std::result::Result<T, SimError>;
