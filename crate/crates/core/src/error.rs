use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violates the operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unknown benchmark `{0}` (expected one of quadratic, doublewell1d, rastrigin, ackley)")]
    Corpus(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Exact W2 comparisons are only available in one dimension.
    #[error("unsupported comparison: {0}")]
    Unsupported(String),
    #[error("state diverged after t = {last_valid_time}: {reason}")]
    Divergence { last_valid_time: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
