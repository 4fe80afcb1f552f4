//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

pub type Result<T, E = SlagError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SlagError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("truncation cap too small: {0}")]
    CapTooSmall(String),

    #[error("degenerate Cauchy data: {0}")]
    DegenerateCauchyData(String),

    #[error("graph condition fails at ({0}, {1}, {2})")]
    GraphCondition(f64, f64, f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("target outside verified image: ({0}, {1}, {2})")]
    TargetOutsideImage(f64, f64, f64),

    #[error("ellipticity violated in inner solve near x3 = {0}")]
    EllipticityViolated(f64),

    #[error("Hessian undefined at singular point")]
    HessianUndefinedAtSingularPoint,

    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureTolerance(String),

    #[error("pipeline stage `{stage}` failed: {reason}")]
    Pipeline { stage: String, reason: String },

    #[error("construction failure: {0}")]
    Construction(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SlagError {
    pub fn pipeline(stage: &str, reason: impl Into<String>) -> Self {
        SlagError::Pipeline {
            stage: stage.to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 verification failure, 2 usage/config, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SlagError::Verification(_) | SlagError::Pipeline { .. } => 1,
            SlagError::Parameter(_) | SlagError::Config(_) | SlagError::CapTooSmall(_) => 2,
            _ => 3,
        }
    }
}
