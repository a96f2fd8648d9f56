use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("image is not single-channel grayscale ({0})")]
    NotGrayscale(String),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("{width}x{height} is not a multiple of 8 in both dimensions")]
    DimensionNotMultipleOf8 { width: usize, height: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("invalid watermark bit {value} at index {index}")]
    InvalidBit { index: usize, value: u8 },

    #[error("invalid midband mask: {0}")]
    InvalidMask(String),

    #[error("secret key must not be empty")]
    EmptyKey,

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("PN sequence length {0} is too small")]
    LengthTooSmall(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate reference watermark: {0}")]
    DegenerateReference(String),

    #[error("payload of {bits} bits exceeds capacity of {capacity} blocks")]
    PayloadTooLarge { bits: usize, capacity: usize },

    #[error("invalid gain {0}")]
    InvalidGain(f64),

    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),

    #[error("codec failure: {0}")]
    CodecFailure(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
