use thiserror::Error;

/// Errors raised by model construction, control law evaluation and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value is outside its admissible range.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: String,
        got: String,
    },

    /// A matrix that must be inverted is singular (or not square).
    #[error("matrix {name} is singular or not square")]
    Singular { name: String },

    /// Gain matrices failed validation; the message names the violated property.
    #[error("invalid gains: {0}")]
    Gains(String),

    /// The simulated state left the divergence bound.
    #[error("divergence at t = {time:.6} s (step {step}): |{signal}| = {value:e} exceeds {bound:e}")]
    Divergence {
        time: f64,
        step: usize,
        signal: String,
        value: f64,
        bound: f64,
    },

    /// Scenario file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        got: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for the divergence variant; the CLI maps it to its own exit code.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
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
