use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("incompatible orders: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (Cholesky pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular operator: {0}")]
    Singular(String),

    /// A shape or dimension parameter is outside the region where the
    /// requested quantity exists. `requirement` names the binding threshold.
    #[error("{requirement} required ({name} = {value})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, requirement: impl Into<String>) -> Self {
        Error::Domain {
            name,
            value,
            requirement: requirement.into(),
        }
    }
}
