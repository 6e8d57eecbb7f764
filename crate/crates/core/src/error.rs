use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model explains no variance: var(y - mean(y)) - var(y - yhat) = {0} is not positive")]
    ModelExplainsNothing(f64),

    #[error("{features} features exceed the exact-enumeration cap of {cap}; use permutation sampling instead")]
    FeatureCountExceeded { features: usize, cap: usize },

    #[error("design matrix is rank deficient (column {column} is linearly dependent on earlier columns)")]
    SingularDesign { column: usize },

    #[error("no valid split: every feature is constant")]
    NoValidSplit,

    #[error("target training R² {target} is unreachable: best achieved was {best} after {iterations} iterations")]
    TargetUnreachable { target: f64, best: f64, iterations: usize },

    #[error("correlation matrix is not positive definite (pivot {pivot} at index {index})")]
    NonPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures that come from the numbers rather than from how
    /// the inputs were laid out.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ModelExplainsNothing(_)
                | Error::SingularDesign { .. }
                | Error::NoValidSplit
                | Error::TargetUnreachable { .. }
                | Error::NonPositiveDefinite { .. }
        )
    }
}
