use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value {value} at index {index} outside [{lo}, {hi}]")]
    OutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("loss stream exhausted after {rounds} of {expected} rounds")]
    StreamExhausted { rounds: usize, expected: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Checks that every entry of `values` lies in `[lo, hi]`.
pub(crate) fn check_range(values: &[f64], lo: f64, hi: f64) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value >= lo && value <= hi) {
            return Err(Error::OutOfRange {
                index,
                value,
                lo,
                hi,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::param(name, format!("{value} not in (0, 1)")));
    }
    Ok(())
}
