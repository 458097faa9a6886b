use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Zernike index {0} (expected 0..=18)")]
    InvalidIndex(u32),

    #[error("invalid optical configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel {kernel_w}x{kernel_h} too large for image {image_w}x{image_h} under reflective padding")]
    KernelTooLarge {
        kernel_w: usize,
        kernel_h: usize,
        image_w: usize,
        image_h: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate histogram: image has a single intensity level")]
    DegenerateHistogram,

    #[error("correlation undefined: both images are constant")]
    UndefinedCorrelation,

    #[error("unsupported format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("expected a single-channel image in {path}, found {channels} channels")]
    ChannelCount { path: PathBuf, channels: u8 },

    #[error("corrupt file {path} at byte offset {offset}: {reason}")]
    Corrupt {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
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

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures originating from the filesystem or file contents.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Codec { .. }
                | Error::Corrupt { .. }
                | Error::UnsupportedFormat { .. }
                | Error::ChannelCount { .. }
        )
    }

    /// True for numeric breakdowns (NaN losses, out-of-range convolution output).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
