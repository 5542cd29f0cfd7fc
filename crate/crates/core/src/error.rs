use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A problem instance or configuration value is out of its admissible range.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    /// A sampling family cannot guarantee the bounded-density constants it advertises.
    #[error("density family rejected: {0}")]
    Density(String),

    /// An operation precondition does not hold for the given instance.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A precoder exceeded the per-antenna unit power constraint.
    #[error("antenna {antenna} transmits average power {power:.9} > 1 at P = {p:e}")]
    PowerViolation { antenna: usize, power: f64, p: f64 },

    /// Exhaustive enumeration would exceed the configured cap.
    #[error("enumeration needs {required} codeword pairs but the cap is {cap}; raise the cap to at least {required}")]
    CapExceeded { required: u64, cap: u64 },

    /// Redrawing ill-conditioned channel estimates did not produce a usable one.
    #[error("no channel estimate with condition number <= {limit:e} after {attempts} draws")]
    IllConditioned { limit: f64, attempts: usize },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
