use thiserror::Error;

/// Errors produced anywhere in the inference engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error on {axis}: {message}")]
    Shape { axis: String, message: String },

    #[error("cascade parse error at line {line}: {message}")]
    Parse { line: u32, message: String },

    #[error("unsupported cascade feature: {0}")]
    UnsupportedFeature(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing weight tensor `{0}`")]
    MissingWeight(String),

    #[error("archive format error: {0}")]
    Format(String),

    #[error("archive truncated at byte {offset}: needed {needed} bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("duplicate tensor name `{0}`")]
    Duplicate(String),

    #[error("unsupported archive version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(axis: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            axis: axis.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
