use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("population must contain at least one neuron")]
    EmptyPopulation,

    #[error("lattice holds {capacity} sites but {requested} neurons were requested")]
    Capacity { requested: usize, capacity: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sinkhorn did not converge after {iterations} iterations (marginal error {marginal_error:e})")]
    NotConverged { iterations: usize, marginal_error: f64 },

    #[error("hyperparameter schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("kernel matrix is ill-conditioned (cholesky failed with jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("gamma fit failed: {0}")]
    Fit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("objective failed: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
