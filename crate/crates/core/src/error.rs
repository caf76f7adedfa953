use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or layer dimensions do not fit together.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An invalid network, layer or training configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller passed arguments outside an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A value left the numeric domain (division by zero, near-singular
    /// denominator, non-finite loss).
    #[error("numeric domain error in {layer}: {detail}")]
    Numeric { layer: String, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {detail}")]
    Image { path: PathBuf, detail: String },

    /// A checkpoint file could not be decoded; `section` names the part that failed.
    #[error("corrupt checkpoint {path} (section {section}): {detail}")]
    Checkpoint {
        path: PathBuf,
        section: &'static str,
        detail: String,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } => 3,
            _ => 2,
        }
    }
}
