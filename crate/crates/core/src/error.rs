use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid latent order: {0}")]
    InvalidOrder(String),

    #[error("no block with two or more time points to split")]
    NoSplittableBlock,

    #[error("latent order has a single block")]
    SingleBlock,

    #[error("invalid block range {start}..={end} for a series of length {len}")]
    InvalidRange { start: usize, end: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
