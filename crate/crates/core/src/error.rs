use thiserror::Error;

/// Failure categories, used by the command line front end to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or input data.
    Input,
    /// A numerical procedure did not produce a usable answer.
    Numerical,
    /// File system failures.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("speed c = {c} is below the minimal speed c* = {cstar}")]
    SubcriticalSpeed { c: f64, cstar: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("field does not cross level {level}")]
    NoFront { level: f64 },

    #[error("numerical blow-up at step {step} (t = {time})")]
    NumericalBlowup { step: usize, time: f64 },

    #[error("computational domain exhausted at t = {time}: {reason}")]
    DomainExhausted { time: f64, reason: String },

    #[error("alignment not converged: sup distance {distance} exceeds {limit}")]
    NotConverged { distance: f64, limit: f64 },

    #[error("instability: norm {norm} at tau = {tau}")]
    Instability { norm: f64, tau: f64 },

    #[error("quadrature tolerance not met: estimated error {estimate} > {tol}")]
    ToleranceNotMet { estimate: f64, tol: f64 },

    #[error("no data: {0}")]
    NoData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::SubcriticalSpeed { .. }
            | Error::Parse(_) => ErrorCategory::Input,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
