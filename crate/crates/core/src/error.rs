use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("hypothesis error: {0}")]
    Hypothesis(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("input error: {0}")]
    Input(String),
    /// Iteration cap reached. `best` is the best value seen before giving up.
    #[error("convergence error at {context}: best value {best} after {iterations} iterations")]
    Convergence {
        context: String,
        best: f64,
        iterations: usize,
    },
}

impl Error {
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }

    /// Prefix the location of a failure, used when a norm error bubbles up
    /// through an estimate.
    pub fn within(self, location: &str) -> Self {
        match self {
            Error::Convergence {
                context,
                best,
                iterations,
            } => Error::Convergence {
                context: format!("{location}: {context}"),
                best,
                iterations,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
