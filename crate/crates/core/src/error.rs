use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BmaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("model space too large: p = {p} exceeds the enumeration cap of {cap}")]
    Capacity { p: usize, cap: usize },
    #[error("numerically invalid prior: {0}")]
    InvalidPrior(String),
    #[error("marginal likelihood is unbounded in g (R² = 1)")]
    UnboundedMarginal,
    #[error("every model has zero posterior mass")]
    DegenerateEnsemble,
    #[error("numerical integration failed to converge: {0}")]
    Integration(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<BmaError>,
    },
}

pub type Result<T, E = BmaError> = std::result::Result<T, E>;
