use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: atom at x={location} has mass {mass} < 2*dxi = {limit}")]
    GridTooCoarse { location: f64, mass: f64, limit: f64 },

    #[error("characteristics not monotone: y[{index}] - y[{prev}] = {gap}")]
    NonMonotone { index: usize, prev: usize, gap: f64 },

    #[error("inconsistent state at node {index}: q = {q} but rbar = {rbar}")]
    Inconsistent { index: usize, q: f64, rbar: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("step rejected at t={t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("left asymptote of the reduced velocity is {value}, expected 0 (requires u(-inf) = -kappa/2)")]
    AsymptoteMismatch { value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command-line driver: 2 for invalid input,
    /// 3 for solver aborts, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StepRejected { .. } | Error::NonMonotone { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
