use thiserror::Error;

/// Errors produced by the synthesis engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty distribution: {0}")]
    EmptyDistribution(&'static str),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("archive format error: {0}")]
    Format(String),
    #[error("archive truncated: {0}")]
    Truncated(String),
    #[error("incomplete archive: {0}")]
    IncompleteArchive(String),
    #[error("texture id {0} has no matching samples")]
    UnmatchableId(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
