use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("result dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("matrix has rank at least 2")]
    RankNotOne,
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("matrix is singular")]
    Singular,
    #[error("sentinel power has trace {trace}, so it is not similar to E00")]
    NotIdempotentSimilar { trace: String },
    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("need at least 3 terms for epsilon acceleration, got {0}")]
    DegenerateSequence(usize),
    #[error("floating-point overflow: {0}")]
    Overflow(String),
    #[error("no bracketing interval for F(s, t) = 1 at t = {t}")]
    NoBracket { t: f64 },
    #[error("root unstable under truncation at t = {t}: {full} vs {shallow}")]
    TruncationUnstable { t: f64, full: f64, shallow: f64 },
    #[error("no root of det(I - F(s, t)) in (0, 2) at t = {t}")]
    NoRoot { t: f64 },
    #[error("{count} words with zero corner value encountered")]
    ZeroCorners { count: u64 },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("{count} of {trials} products degenerated to zero")]
    DegenerateProduct { count: usize, trials: usize },
    #[error("no linear representation reproduces the counts (first mismatch at n = {first_mismatch})")]
    NoRepresentationFound { first_mismatch: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
