use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("neuron {neuron} has no outgoing weight mass, its service rate would be zero")]
    DegenerateNeuron { neuron: usize },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("fixed-point solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular or ill-conditioned system: {0}")]
    SingularSystem(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("queue is not ergodic: utilization {utilization} >= 1")]
    NonErgodic { utilization: f64 },

    #[error("truncation too small: probability mass {mass:e} on the cap B = {cap}, increase B")]
    TruncationTooSmall { cap: usize, mass: f64 },

    #[error("oracle guard violated: {0}")]
    Guard(String),

    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("coordinate {coordinate}: {source}")]
    Coordinate {
        coordinate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("degenerate scaler for column `{column}`: max equals min ({value})")]
    DegenerateScaler { column: String, value: f64 },

    #[error("ill-conditioned design matrix: {0}")]
    IllConditioned(String),

    #[error("model state error: {0}")]
    State(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
