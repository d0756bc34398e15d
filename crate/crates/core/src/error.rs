use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the training and inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image decode failed for {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    #[error("data format error: {0}")]
    DataFormat(String),

    #[error("class directory {0:?} contains no readable images")]
    EmptyClass(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel {kernel}x{kernel} does not fit in {width}x{height} image")]
    KernelTooLarge {
        kernel: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("all sample weights are zero")]
    ZeroWeights,

    #[error("sample weights underflowed to zero; boosting diverged")]
    WeightUnderflow,

    #[error("training class {class:?} failed: {source}")]
    ClassTraining {
        class: String,
        #[source]
        source: Box<Error>,
    },

    #[error("model file error: {0}")]
    ModelFormat(#[from] ModelFormatError),
}

/// Failures specific to the versioned binary model file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelFormatError {
    #[error("bad magic: expected \"DPBOOST1\"")]
    BadMagic,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch in section {section:?}")]
    ChecksumMismatch { section: String },

    #[error("malformed model payload: {0}")]
    Malformed(String),
}
