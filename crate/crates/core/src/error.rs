use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// An iterative method hit its iteration cap or broke down.
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    /// Line search could not find an acceptable step.
    Stagnation {
        method: &'static str,
        residual: f64,
        history: Vec<f64>,
    },
    /// LU factorization met a zero pivot.
    SingularMatrix { column: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Stagnation { .. } | Error::SingularMatrix { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonConvergence {
                method,
                iterations,
                residual,
                ..
            } => write!(
                f,
                "{method} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Stagnation {
                method, residual, ..
            } => write!(
                f,
                "{method} stagnated: line search failed at residual {residual:e}"
            ),
            Error::SingularMatrix { column } => {
                write!(
                    f,
                    "matrix is singular to working precision (column {column})"
                )
            }
        }
    }
}

impl core::error::Error for Error {}
