//! Crate-wide error type.

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text (LIBSVM lines, sidecar metadata).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally invalid data: dimension mismatches, out-of-range labels,
    /// inconsistent trees.
    #[error("data error: {0}")]
    Data(String),

    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A numeric procedure cannot run or did not produce a usable result
    /// (e.g. a theorem hypothesis is not met).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The model file is corrupt or has an unsupported layout.
    #[error("model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
