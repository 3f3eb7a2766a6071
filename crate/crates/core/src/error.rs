use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("follower index {index} out of range for {count} followers")]
    FollowerOutOfRange { index: usize, count: usize },

    #[error("best response of follower {follower} did not converge after {iterations} bisection steps")]
    BisectionFailed { follower: usize, iterations: usize },

    #[error("joint profile enumeration of size {size} exceeds cap {cap}")]
    EnumerationTooLarge { size: u128, cap: u128 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
