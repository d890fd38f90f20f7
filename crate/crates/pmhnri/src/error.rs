use thiserror::Error;

/// Failure classes. Each maps onto one CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad arguments or configuration.
    #[error("usage: {0}")]
    Usage(String),
    /// Input values outside the allowed domain.
    #[error("domain: {0}")]
    Domain(String),
    /// Malformed or inconsistent data.
    #[error("data: {0}")]
    Data(String),
    /// Parse failure with a 1-based line number.
    #[error("parse: line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A division by (numerically) zero or a similar singularity.
    #[error("singular: {0}")]
    Singular(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Singular(_) => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Domain(_) => "domain",
            Error::Data(_) => "data",
            Error::Parse { .. } => "parse",
            Error::Singular(_) => "singular",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
