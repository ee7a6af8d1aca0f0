use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite quantile at p = {p}; truncate the marginal first")]
    NonFiniteQuantile { p: f64 },
    #[error("invalid probability range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("column index {index} out of bounds for d = {d}")]
    IndexOutOfBounds { index: usize, d: usize },
    #[error("cost function validation failed: {0}")]
    ValidationFailed(String),
    #[error("enumeration needs {required} arrangements, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Config(String),
}
