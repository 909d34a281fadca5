use std::path::PathBuf;

use thiserror::Error;

use crate::svm::SvmModel;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a tensor file was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    UnsupportedDtype,
    Truncated,
    NonFinite,
    TrailingBytes,
    BadHeader,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate sample {index}: zero self-similarity")]
    DegenerateSample { index: usize },

    #[error("solver did not converge: KKT residual {kkt_residual:.3e} after {iterations} iterations")]
    Convergence {
        best: Box<SvmModel>,
        kkt_residual: f64,
        iterations: usize,
    },

    #[error("format error at byte {offset} ({kind:?}): {message}")]
    Format {
        kind: FormatErrorKind,
        offset: u64,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cache entry {path} is invalid: {message}")]
    CacheInvalid { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Convergence,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: FormatErrorKind, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            offset,
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error beneath any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Config(_) => ErrorClass::Config,
            Error::Convergence { .. } => ErrorClass::Convergence,
            _ => ErrorClass::Data,
        }
    }
}
