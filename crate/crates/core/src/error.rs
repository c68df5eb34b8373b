use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the image kernels, blending, refinement and pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("image of {height}x{width} is too small for a {levels}-level pyramid")]
    TooManyLevels { height: usize, width: usize, levels: usize },

    #[error("foreground extraction failed: {0}")]
    ExtractionFailed(String),

    #[error("trimap seeding failed: {0}")]
    SeedingFailed(String),

    #[error("empty pool: {0}")]
    EmptyPool(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by configuration or arguments rather than input data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config(_))
    }
}
