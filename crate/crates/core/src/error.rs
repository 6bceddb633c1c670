use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid class index {0} (expected 0..8)")]
    InvalidClass(u8),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("channel mismatch: expected {expected} channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("corpus layout error: {0}")]
    Layout(String),

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("backward called without a cached train-mode forward pass")]
    NoForwardCache,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidClass(_) => "invalid-class",
            Error::Dimension(_) => "dimension",
            Error::Shape(_) => "shape",
            Error::ChannelMismatch { .. } => "channel-mismatch",
            Error::EmptyInput(_) => "empty-input",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Layout(_) => "layout",
            Error::Spec(_) => "spec",
            Error::CorruptCheckpoint(_) => "corrupt-checkpoint",
            Error::NoForwardCache => "no-forward-cache",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Json(_) => "json",
        }
    }
}
