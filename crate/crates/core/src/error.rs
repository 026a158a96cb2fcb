use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("stationary density is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("no sign change found in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root scan window [-{half_width}, {half_width}] does not bracket the roots")]
    WindowTooSmall { half_width: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("particle {particle} diverged at step {step} (x = {position})")]
    Divergence { step: u64, particle: usize, position: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
