use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown series `{0}`")]
    UnknownSeries(String),

    #[error("duplicate series name `{0}`")]
    DuplicateSeries(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("lag count {lags} is not below panel length {length}")]
    LagTooLarge { lags: usize, length: usize },

    #[error("target series `{0}` cannot be excluded from its own design")]
    TargetExcluded(String),

    #[error("source and target are the same series `{0}`")]
    SameSeries(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel system (K + lambda I) is not positive definite after jitter retry")]
    NotPositiveDefinite,

    #[error("rank-deficient design; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("undecidable test: all {0} differences are exactly zero")]
    Undecidable(usize),

    #[error("simulation diverged at node {node}, step {step} (value {value:e})")]
    Divergence { node: String, step: usize, value: f64 },

    #[error("both classes must be present: {positives} positives, {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },

    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
