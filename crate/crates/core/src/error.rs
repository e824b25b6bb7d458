use thiserror::Error;

/// Errors raised by the numeric kernels and the segmentation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sum of weights is (numerically) zero")]
    AllWeightsZero,
    #[error("normal matrix is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("neighborhood size k = {k} must be smaller than the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("point cloud is degenerate: {0}")]
    DegenerateCloud(String),
    #[error("normalisation scale is zero ({0})")]
    ZeroScale(&'static str),
    #[error("points are collinear, no circle fits them")]
    CollinearPoints,
    #[error("non-finite loss or gradient at step {step}")]
    NonFinite { step: usize },
    #[error("invalid synthetic log spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing property `{0}`")]
    MissingProperty(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
