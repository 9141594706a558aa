use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("source at {distance_m} m is not outside the head (radius {head_radius_m} m)")]
    SourceInsideHead { distance_m: f64, head_radius_m: f64 },

    #[error("{required} taps needed to hold the response, only {available} configured")]
    TooFewTaps { required: usize, available: usize },

    #[error("truth grid step {step_deg} deg is coarser than the required 1 deg")]
    GridTooCoarse { step_deg: f64 },

    #[error("length mismatch: {what} has {actual} samples, expected {expected}")]
    LengthMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("recorded signal is all zero over samples {start}..{end}; NMSE undefined")]
    SilentSpan { start: usize, end: usize },

    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),

    #[error("ERB band {band} has zero reference energy")]
    EmptyBand { band: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported format_version {found:?} in {path}")]
    UnsupportedVersion { path: PathBuf, found: String },

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("cannot parse {path} at line {line}, column {column} (byte {offset}): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("csv output {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
