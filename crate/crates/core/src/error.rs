use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("turning number is not integral (residual {residual:.3e}): {reason}")]
    NonIntegralTurning { residual: f64, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("step rejected: energy change {actual:.6e} exceeds allowance {allowed:.6e}")]
    StepRejected { actual: f64, allowed: f64 },

    #[error("constraint projection diverged after {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("infeasible constraint targets: {0}")]
    InfeasibleTargets(String),

    #[error("no progress: time step {dt:.3e} underflowed")]
    NoProgress { dt: f64 },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("unsupported schema at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
