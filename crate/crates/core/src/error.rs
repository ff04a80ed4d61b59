use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A coordinate, probability or parameter was NaN or infinite.
    NonFiniteInput { row: usize },
    /// A point cloud needs at least two rows.
    TooFewPoints(usize),
    /// Rows of a point cloud have different lengths.
    RaggedRows { expected: usize, got: usize, row: usize },
    /// Cosine similarity is undefined for a zero vector.
    ZeroNormRow(usize),
    /// All points coincide, k-means has nothing to separate.
    DegenerateCloud,
    /// Silhouette needs at least two non-empty clusters.
    InsufficientClusters,
    /// Persistent homology was asked for a cloud above the configured cap.
    CloudTooLarge { k: usize, cap: usize },
    EmptyTokenStream,
    /// A token probability outside `[0, 1]` or a negative entropy.
    InvalidTokenStatistic { index: usize, value: f64 },
    DimensionMismatch { expected: usize, got: usize },
    NonPositiveAlpha { index: usize, value: f64 },
    InvalidWeights(&'static str),
    InvalidParameter(&'static str),
    InvalidHyper(&'static str),
    /// Training examples disagree with the head about the number of components.
    InconsistentN { expected: usize, got: usize },
    EmptyPredictions,
    EmptyTrainingSet,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteInput { row } => write!(f, "non-finite value in row {row}"),
            Error::TooFewPoints(k) => write!(f, "point cloud needs at least 2 points, got {k}"),
            Error::RaggedRows { expected, got, row } => {
                write!(f, "row {row} has dimension {got}, expected {expected}")
            }
            Error::ZeroNormRow(i) => write!(f, "row {i} has zero norm, cosine undefined"),
            Error::DegenerateCloud => write!(f, "all points coincide"),
            Error::InsufficientClusters => write!(f, "silhouette needs at least two clusters"),
            Error::CloudTooLarge { k, cap } => {
                write!(f, "cloud of {k} points exceeds homology cap of {cap}")
            }
            Error::EmptyTokenStream => write!(f, "token probability list is empty"),
            Error::InvalidTokenStatistic { index, value } => {
                write!(f, "invalid token statistic {value} at position {index}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonPositiveAlpha { index, value } => {
                write!(f, "alpha[{index}] = {value} is not positive")
            }
            Error::InvalidWeights(why) => write!(f, "invalid weights: {why}"),
            Error::InvalidParameter(why) => write!(f, "invalid parameter: {why}"),
            Error::InvalidHyper(why) => write!(f, "invalid hyperparameter: {why}"),
            Error::InconsistentN { expected, got } => {
                write!(f, "inconsistent component count: expected {expected}, got {got}")
            }
            Error::EmptyPredictions => write!(f, "no predictions to evaluate"),
            Error::EmptyTrainingSet => write!(f, "training set is empty"),
        }
    }
}

impl core::error::Error for Error {}
