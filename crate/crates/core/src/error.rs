use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // image i/o
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("cannot decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    WriteError { path: PathBuf, reason: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),

    // manifests, splits and configuration
    #[error("split ratios must be nonnegative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("config error: {0}")]
    Config(String),

    // dataset generation
    #[error("template has no [FULL NAME] placeholder")]
    MissingPlaceholder,
    #[error("template has {0} [FULL NAME] placeholders, expected exactly one")]
    MultiplePlaceholders(usize),
    #[error("backend failed on sample {id}: {reason}")]
    BackendFailure { id: String, reason: String },
    #[error("image size {height}x{width} below the minimum {min}")]
    SizeTooSmall { height: usize, width: usize, min: usize },
    #[error("name pool is empty")]
    EmptyNamePool,

    // diversity
    #[error("empty input")]
    EmptyInput,
    #[error("category sets differ for attribute {0}")]
    CategoryMismatch(String),
    #[error("need at least {min} points for projection, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("at most {max} points supported by exact projection, got {got}")]
    TooManyPoints { got: usize, max: usize },
    #[error("perplexity {perplexity} infeasible for {n} points (must be >= 5 and < (n-1)/3)")]
    PerplexityInfeasible { perplexity: f64, n: usize },
    #[error("no attribute metadata for sample {0}")]
    MissingMetadata(String),

    // models
    #[error("spatial size {height}x{width} not divisible by {divisor}")]
    ShapeNotDivisible { height: usize, width: usize, divisor: usize },
    #[error("reduction {reduction} does not divide channel count {channels}")]
    BadReduction { channels: usize, reduction: usize },
    #[error("spatial size {height}x{width} below the minimum {min}")]
    SpatialTooSmall { height: usize, width: usize, min: usize },
    #[error("invalid architecture config: {0}")]
    BadConfig(String),
    #[error("parameter {0:?} missing from parameter set")]
    MissingParam(String),

    // losses
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("discriminator scores contain non-finite values")]
    NonFiniteScores,

    // training
    #[error("non-finite loss at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("architecture fingerprint mismatch: checkpoint {found}, expected {expected}")]
    FingerprintMismatch { found: String, expected: String },

    // evaluation
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix product has eigenvalue {0} below tolerance")]
    NumericallyIndefinite(f64),
    #[error("no quality scorer available")]
    ScorerUnavailable,
    #[error("scorer returned {0}, outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("pipeline {name} failed: {reason}")]
    PipelineFailure { name: String, reason: String },
    #[error("invalid benchmark parameters: {0}")]
    BadBenchmark(String),

    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn for_sample(self, id: &str) -> Self {
        Error::Sample { id: id.to_string(), source: Box::new(self) }
    }
}
