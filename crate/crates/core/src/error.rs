use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The hypergeometric series was asked for an argument outside its unit disk.
    #[error("series argument |z| = {0} is outside the convergence disk |z| < 1; use quadrature")]
    ConvergenceDomain(f64),

    #[error("series did not converge within {terms} terms (last term {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    /// Adaptive integration ran out of budget before reaching the requested tolerance.
    #[error("tolerance {requested:e} not reached, achieved error estimate {achieved:e}")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("density at t' = 0 is singular for shape {shape} < 1")]
    SingularPoint { shape: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
