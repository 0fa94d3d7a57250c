use std::path::PathBuf;

/// Errors surfaced by the library.
///
/// `Usage` covers caller mistakes (bad shapes, out-of-range parameters); the
/// CLI maps it to exit code 2 together with I/O and decode failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("failed to encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("malformed tensor file: {0}")]
    TensorFormat(String),

    #[error("base image {index} already looks degraded: {task} rule fires with margin {margin:.4}")]
    RejectedBase {
        index: usize,
        task: String,
        margin: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
