use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented precondition (shapes, ranges, counts).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// MDA inflation coefficients are not on the `sum 1/alpha = 1` simplex.
    #[error("invalid MDA schedule: sum of 1/alpha = {sum} (must equal 1 within 1e-12)")]
    InvalidSchedule { sum: f64 },

    #[error("pressure solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("time step underflow at t = {time} days (dt = {dt:e} days)")]
    TimeStepUnderflow { time: f64, dt: f64 },

    #[error("well {0} has zero total mobility at every perforation")]
    ZeroWellMobility(String),

    #[error("forward simulation of ensemble member {member} failed: {source}")]
    MemberFailed {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    /// Any other numerical breakdown (non-finite values, inconsistent moduli).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors raised by the numerics rather than by bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SolverDivergence { .. }
            | Error::TimeStepUnderflow { .. }
            | Error::ZeroWellMobility(_)
            | Error::Numerical(_) => true,
            Error::MemberFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
