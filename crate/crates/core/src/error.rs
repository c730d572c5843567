use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("singular interior block: {0}")]
    Singular(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("finite-difference step underflow: {0}")]
    StepUnderflow(String),

    #[error("missing annotation: {0}")]
    MissingAnnotation(&'static str),

    #[error("sign constancy violated on {0} boundary block")]
    SignConstancy(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
