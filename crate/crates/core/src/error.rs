use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid simplex point: {0}")]
    InvalidSimplex(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The partition function expansion needs an even number of coordinates.
    #[error("unsupported dimension n = {0}: n + 1 must be even")]
    UnsupportedDimension(usize),

    #[error("brute-force enumeration of {0} terms exceeds the guard")]
    EnumerationTooLarge(u128),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
