use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// `jω` is (numerically) an eigenvalue of `A`.
    #[error("pole on the imaginary axis at omega = {omega}")]
    PoleOnAxis { omega: f64 },

    #[error("point at infinity cannot be projected to the complex plane")]
    PointAtInfinity,

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    /// The input violates a mathematical precondition (instability, no stabilizing
    /// Riccati solution, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("frequency grid too coarse: {0}")]
    Resolution(String),

    #[error("gap computation failed for pair ({i}, {k}): {source}")]
    Pair {
        i: usize,
        k: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors that stem from the mathematical content of the inputs
    /// rather than from malformed arguments.
    pub fn is_domain(&self) -> bool {
        match self {
            Error::PoleOnAxis { .. }
            | Error::Domain(_)
            | Error::IllConditioned(_)
            | Error::NotPsd { .. }
            | Error::Numerical(_)
            | Error::Resolution(_)
            | Error::PointAtInfinity => true,
            Error::Pair { source, .. } => source.is_domain(),
            Error::InvalidArgument(_) | Error::Dimension(_) => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
