use std::path::PathBuf;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode image `{path}`: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("unsupported image format for `{0}`")]
    UnsupportedFormat(PathBuf),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("region {x},{y} {w}x{h} does not fit inside {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("segmentation failed: {0}")]
    Segmentation(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("unknown descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data invalid: {0}")]
    Training(String),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
