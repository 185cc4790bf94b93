use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid deformation: det F = {det:e} must be positive")]
    InvalidDeformation { det: f64 },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("laminate homogenization did not converge (residual {residual:e} after {iterations} iterations)")]
    HomogenizationFailure { residual: f64, iterations: usize },

    #[error("Legendre transform failed (residual {residual:e}, singular dielectric block: {singular})")]
    LegendreFailure { residual: f64, singular: bool },

    #[error("stability analysis failed: {0}")]
    Stability(String),

    #[error("equilibrium path failed beyond e0 = {last_e0:e}: {reason}")]
    PathFailure { last_e0: f64, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
