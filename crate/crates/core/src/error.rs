use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("data matrix needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("dataset has no labels")]
    UnlabeledData,
    #[error("intra-block correlation must lie in [0, 1), got {0}")]
    InvalidCorrelation(f64),
    #[error("variance threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("matrix has zero total variance")]
    DegenerateMatrix,
    #[error("cannot form {k} clusters from {n} samples")]
    TooManyClusters { k: usize, n: usize },
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cluster {0} has no samples")]
    EmptyCluster(usize),
    #[error("sequence is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("local orderings do not cover the same feature set")]
    InconsistentFeatureSets,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("attention window must lie in [1, {m}], got {window}")]
    InvalidWindow { window: usize, m: usize },
    #[error("at least 2 features are required, got {0}")]
    TooFewFeatures(usize),
    #[error("invalid loss weights: {0}")]
    InvalidLambdas(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::DegenerateMatrix | Error::NonFinite { .. } | Error::Diverged(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
