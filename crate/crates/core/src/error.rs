use crate::exprlang::{EvalError, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("kernel evaluated outside its domain 0 <= s <= t at (t, s) = ({t}, {s})")]
    OutsideDomain { t: f64, s: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("decay rate must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("kernel has no registered limit function")]
    MissingLimit,
    #[error("kernel has no t-derivative")]
    MissingDerivative,
    #[error("theta = {theta} lies outside the open interval (0, {bound}) required for q = {q}")]
    InvalidTheta { theta: f64, q: f64, bound: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("interval endpoints out of order: {a} > {b}")]
    Ordering { a: f64, b: f64 },
    #[error("log-weighted curve needs evaluation times greater than 1")]
    LogDomain,
    #[error("horizon too short: {0}")]
    HorizonTooShort(String),
    #[error("window [{a}, {b}] contains fewer than two evaluation times")]
    EmptyWindow { a: f64, b: f64 },
    #[error("an ensemble needs at least one path and one Brownian component")]
    EmptyEnsemble,
}

pub type Result<T> = std::result::Result<T, Error>;
