use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature could not meet its tolerance within the evaluation budget.
    #[error("quadrature failed: estimate {estimate:e} with error {abs_err:e} after {evals} evaluations")]
    Quadrature {
        estimate: f64,
        abs_err: f64,
        evals: usize,
    },

    /// The bracket handed to a root finder does not straddle the target.
    #[error("bracket [{lo:e}, {hi:e}] does not straddle the target")]
    Bracket { lo: f64, hi: f64 },

    /// A curve that must be monotone was found not to be.
    #[error("curve is not monotone near {at:e}")]
    NonMonotone { at: f64 },

    /// Iteration limit hit before convergence.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Exact integer arithmetic overflowed its range.
    #[error("integer overflow in exact arithmetic: {0}")]
    Overflow(String),

    /// A constellation with coincident points.
    #[error("degenerate constellation: points {0} and {1} coincide")]
    Degenerate(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
