use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph generation failed after {attempts} attempts ({model}, n={n})")]
    GenerationFailed {
        model: String,
        n: usize,
        attempts: usize,
    },

    #[error("graph is not connected")]
    Disconnected,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bandwidth k={k} out of range for n={n}")]
    BandwidthOutOfRange { k: usize, n: usize },

    #[error("vertex {vertex} out of range for n={n}")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("vertex {0} appears more than once")]
    DuplicateVertex(usize),

    #[error("vertex {0} is not in the sample set")]
    VertexNotInSample(usize),

    #[error("sample size {m} exceeds vertex count {n}")]
    SampleSizeTooLarge { m: usize, n: usize },

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("ordering is not a permutation of all {0} vertices")]
    NotAPermutation(usize),

    #[error("{0} is not a pointwise criterion")]
    NotPointwise(String),

    #[error("operation requires least-squares reconstruction")]
    RequiresLeastSquares,

    #[error("singular system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("numerical tolerance violated: {0}")]
    Tolerance(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
