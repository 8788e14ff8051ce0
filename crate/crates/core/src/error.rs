use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value is not a member of the range it was checked against.
    #[error("domain error: value {value} is not in {context}")]
    Domain { value: String, context: String },

    /// A caller-supplied argument is malformed or out of its admissible set.
    #[error("argument error: {0}")]
    Argument(String),

    /// The operation cannot run on this input class.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A real input fell outside a closed range.
    #[error("range error: {x} is outside [{lo}, {hi}]")]
    Range { x: String, lo: String, hi: String },

    /// A search would exceed its configured size limit.
    #[error("resource limit: search space of {required} exceeds the cap of {cap}")]
    Resource { required: String, cap: u64 },

    /// Malformed textual input.
    #[error("format error: {0}")]
    Format(String),

    /// Malformed cell in a tabular input. Rows and columns are 1-based.
    #[error("parse error at row {row}, column {col}: {message}")]
    Cell {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    /// A guarantee that must hold by construction was observed to fail.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn domain(value: impl ToString, context: impl Into<String>) -> Self {
        Error::Domain {
            value: value.to_string(),
            context: context.into(),
        }
    }

    /// True for failures that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
