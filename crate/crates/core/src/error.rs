use thiserror::Error;

/// Errors produced by model evaluation, scenario handling and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent dimensions or references between model parts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the domain of an operation (negative size, bad weight, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed scenario or trace syntax.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A well-formed file whose content breaks a model invariant.
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),

    /// The optimization problem has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An enumeration would exceed its configured evaluation budget.
    #[error("budget exceeded: {required} evaluations required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
