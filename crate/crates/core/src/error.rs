use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point ({re}, {im}) is not strictly inside the unit disk")]
    OutsideDisk { re: f64, im: f64 },

    #[error("invalid radius profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("table contains coincident points; value is not finite")]
    DuplicatePoints,

    #[error("quadrature did not converge: value {value}, error estimate {error} after {evals} evaluations")]
    QuadratureNotConverged { value: f64, error: f64, evals: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LabError::InvalidParameter(msg.into())
    }

    pub(crate) fn profile(msg: impl Into<String>) -> Self {
        LabError::InvalidProfile(msg.into())
    }
}
