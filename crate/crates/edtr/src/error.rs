use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset contains no usable samples")]
    EmptyDataset,
    #[error("embedding endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("embedding endpoint returned an unexpected response: {0}")]
    BadResponseShape(String),
    #[error("no precomputed vector for content hash {0}")]
    MissingPrecomputedVector(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("incompatible parameters: {0}")]
    Incompatible(String),
    #[error("cannot fit: {0}")]
    FitPrecondition(String),
    #[error("query {query_id}: {source}")]
    Sample {
        query_id: String,
        #[source]
        source: edtr_core::Error,
    },
    #[error("{0}")]
    Core(#[from] edtr_core::Error),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// Process exit status for this error: 2 configuration, 3 data,
    /// 4 parameter incompatibility, 5 unmet fitting preconditions.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidSpec(_) | Error::Json { .. } => 2,
            Error::Io { .. } => 2,
            Error::EndpointUnreachable(_) | Error::BadResponseShape(_) | Error::MissingPrecomputedVector(_) => 3,
            Error::MalformedLine { .. } | Error::DimensionMismatch { .. } | Error::EmptyDataset => 3,
            Error::Sample { .. } => 3,
            Error::Incompatible(_) => 4,
            Error::FitPrecondition(_) => 5,
            Error::Core(e) => match e {
                edtr_core::Error::InvalidWeights(_)
                | edtr_core::Error::InvalidParameter(_)
                | edtr_core::Error::InvalidHyper(_) => 2,
                edtr_core::Error::InconsistentN { .. } => 4,
                _ => 3,
            },
        }
    }
}
