use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in contour at channel {channel}, position {position}")]
    NonFinite { channel: usize, position: usize },

    #[error("group elements act on different cyclic groups (Z_{left} vs Z_{right})")]
    GroupMismatch { left: usize, right: usize },

    #[error("contour is degenerate (spread {sigma:e} is below 1e-12)")]
    DegenerateContour { sigma: f64 },

    #[error("kernel size {kernel} exceeds signal length {n}")]
    KernelTooLarge { kernel: usize, n: usize },

    #[error("length {n} is not divisible by coarsening factor {factor}")]
    NotDivisible { n: usize, factor: usize },

    #[error("map is not a circular convolution (residual {residual:e})")]
    NotConvolutional { residual: f64 },

    #[error("non-finite gradient at parameter {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("image has no foreground contour")]
    NoContour,

    #[error("curve has a cusp near t = {t} (speed^2 = {speed_sq:e})")]
    Cusp { t: f64, speed_sq: f64 },

    #[error("curve generator gave up after {attempts} redraws for record {index}")]
    GeneratorExhausted { index: usize, attempts: usize },

    #[error("malformed record on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("dataset mismatch: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
