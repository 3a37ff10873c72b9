use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cost function: {0}")]
    InvalidCostFunction(String),

    #[error("invalid demand distribution: {0}")]
    InvalidDemand(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("malformed problem spec: {0}")]
    Spec(String),

    #[error("chord slope undefined for y = z = {0}")]
    DegenerateChord(i64),

    #[error("order quantity must be non-negative, got {0}")]
    NegativeOrder(i64),

    #[error("discount factor {0} must lie in [0, 1) for infinite-horizon problems")]
    DiscountOutOfRange(f64),

    #[error("empty state window [{lo}, {hi}]")]
    EmptyWindow { lo: i64, hi: i64 },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("policy does not cover state {state} at step {step}")]
    PolicyCoverage { state: i64, step: usize },

    #[error("policy mismatch: {0}")]
    PolicyMismatch(String),

    #[error("brute-force size limits exceeded: {0}")]
    OracleRefused(String),
}
