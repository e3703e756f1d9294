use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation is defined on.
    #[error("domain error: {name} = {value} ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A numerical procedure failed to converge or produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A geometric precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The closed-form optimum fell outside the admissible angle range.
    #[error("no interior optimum: arccos argument {argument} outside [-1, 1]; boundary suggestion alpha = {boundary}")]
    NoInteriorOptimum { argument: f64, boundary: f64 },

    /// Configuration validation error with a dotted field path.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain { name, value, expected }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
