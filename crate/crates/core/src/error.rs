use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed profile document: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("combination space of {size} exceeds cap {cap}; use a greedy or beam strategy")]
    ComboSpaceExceeded { size: u128, cap: u64 },

    #[error("simulation deadlocked at {time_ms} ms with {pending} operations pending")]
    DeadlockDetected { time_ms: f64, pending: usize },

    #[error("mode mismatch: expected a {expected} graph")]
    ModeMismatch { expected: &'static str },

    #[error("instance exceeds oracle limits: {0}")]
    LimitsExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
