use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Factorization or sampler invariant failure. The message carries the
    /// diagnostics needed to reproduce it.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("posterior mean of the last interior cutpoint is {mean_cutpoint:e}, too close to zero to form ratios")]
    DegenerateScale { mean_cutpoint: f64 },

    #[error("optimizer did not converge: final gradient norm {gap:e}")]
    Optimization { gap: f64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// True for failures caused by the caller's inputs rather than by the
    /// numerics of a run.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::Data(_) | Error::Config(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("row {row}: label {label:?} is not one of the declared levels")]
    UnknownLabel { row: usize, label: String },

    #[error("category {label:?} is never observed")]
    UnobservedCategory { label: String },

    #[error("{responses} responses but {rows} covariate rows")]
    DimensionMismatch { responses: usize, rows: usize },

    #[error("row {row}, column {column}: covariate is not finite")]
    NonFinite { row: usize, column: usize },

    #[error("covariate column {column} is constant")]
    ConstantColumn { column: usize },

    #[error("need at least {min} categories, got {got}")]
    TooFewCategories { min: usize, got: usize },

    #[error("duplicate level {label:?}")]
    DuplicateLevel { label: String },

    #[error("dataset is empty")]
    Empty,
}
