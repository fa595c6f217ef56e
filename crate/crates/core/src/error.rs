use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// A record in a JSON Lines file could not be parsed.
    #[error("data error: {path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Invalid parameters or configuration values.
    #[error("config error: {0}")]
    Config(String),

    /// Incompatible tensor or vector shapes.
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// NaN or infinite values where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Checkpoint file is corrupt, truncated or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
