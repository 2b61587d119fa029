use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch { context: &'static str, expected_h: usize, expected_w: usize, got_h: usize, got_w: usize },

    #[error("{context} requires at least {min_h}x{min_w} pixels, got {h}x{w}")]
    TooSmall { context: &'static str, min_h: usize, min_w: usize, h: usize, w: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("non-finite loss at optimization step {step} (level {level})")]
    NonFiniteLoss { level: usize, step: usize },

    #[error("no valid pixels to evaluate")]
    NoValidPixels,

    #[error(transparent)]
    Flo(#[from] FloError),

    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn check_dims(context: &'static str, expected: (usize, usize), got: (usize, usize)) -> Result<()> {
        if expected != got {
            return Err(Error::DimensionMismatch {
                context,
                expected_h: expected.0,
                expected_w: expected.1,
                got_h: got.0,
                got_w: got.1,
            });
        }
        Ok(())
    }

    /// True for failures caused by unreadable or malformed inputs rather than
    /// by a violated numeric contract.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Flo(_)
                | Error::Image { .. }
                | Error::Config { .. }
                | Error::Io(_)
                | Error::DimensionMismatch { .. }
                | Error::TooSmall { .. }
        )
    }
}

/// Parse failures for Middlebury `.flo` files.
#[derive(Debug, Error)]
pub enum FloError {
    #[error("bad magic: expected \"PIEH\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: i32, height: i32 },
    #[error("truncated payload: expected {expected} bytes of flow data, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),
    #[error("{0} trailing bytes after flow data")]
    TrailingData(usize),
    #[error("flow contains non-finite component at pixel ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}
