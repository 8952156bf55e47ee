use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("value buffer has {actual} entries, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("coordinate ({x}, {y}) outside {width}x{height} frame")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("map is not binary: value {value} at ({x}, {y})")]
    NonBinaryMap { x: usize, y: usize, value: f64 },
    #[error("map has zero total mass")]
    ZeroMass,
    #[error("negative value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("density does not sum to one (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("sigma fraction must lie in (0, 1], got {0}")]
    InvalidSigmaFraction(f64),
    #[error("fixation set is empty")]
    EmptyFixations,
    #[error("dataset has no images")]
    EmptyDataset,
    #[error("images do not share a common frame")]
    FrameMismatch,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("positive set is empty")]
    EmptyPositives,
    #[error("negative set is empty")]
    EmptyNegatives,
    #[error("sampler produced an empty negative set")]
    SamplerExhausted,
    #[error("need {needed} negatives but only {available} candidates exist")]
    InsufficientNegatives { needed: usize, available: usize },
    #[error("farthest-neighbor candidate pool is empty")]
    EmptyPool,
    #[error("K must lie in 1..={max}, got {k}")]
    InvalidK { k: usize, max: usize },
    #[error("n_splits must be at least 1")]
    InvalidSplits,
    #[error("map has zero variance")]
    ZeroVariance,
    #[error("unknown image id '{0}'")]
    UnknownImage(String),
    #[error("duplicate image id '{0}'")]
    DuplicateId(String),
    #[error("no prediction for image '{0}'")]
    MissingPrediction(String),
    #[error("unknown mode '{0}'")]
    UnknownMode(String),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("image '{id}': {source}")]
    Image {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("bad magic in {0}")]
    BadMagic(PathBuf),
    #[error("truncated payload in {path}: expected {expected} bytes, found {actual}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at index {index} in {path}")]
    NonFiniteValue { path: PathBuf, index: usize },
    #[error("unsupported graymap {path}: {reason}")]
    Graymap { path: PathBuf, reason: String },
    #[error("schema error in {path}: {reason}")]
    SchemaError { path: PathBuf, reason: String },
    #[error("image '{id}': fixation ({x}, {y}) outside {width}x{height} frame")]
    OutOfBoundsFixation {
        id: String,
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attaches an image id unless one is already attached.
    pub fn in_image(self, id: &str) -> Error {
        match self {
            Error::Image { .. } => self,
            other => Error::Image {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
