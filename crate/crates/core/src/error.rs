use thiserror::Error;

/// Errors raised across the optimization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument `{field}`: {msg}")]
    Argument { field: &'static str, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid relative constants: {0}")]
    InvalidConstants(String),

    #[error("run diverged at iteration {iter}: {msg}")]
    Diverged { iter: usize, msg: String },

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Argument {
            field,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Argument { .. } | Error::Unknown { .. } | Error::Parse { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
