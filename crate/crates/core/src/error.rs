use thiserror::Error;

/// Errors raised by the solver, the post-processing and the configuration layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite initial value {value} at node {index} (x = {x})")]
    NonFiniteData { index: usize, x: f64, value: f64 },

    #[error("stencil spacing {stencil_dx} does not match grid spacing {grid_dx}")]
    SpacingMismatch { stencil_dx: f64, grid_dx: f64 },

    #[error("time step {dt} exceeds the monotonicity bound {dt_max}")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error("non-finite value at node {index} after step {step} (t = {time})")]
    NumericAbort { step: usize, index: usize, time: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e}, {evals} evaluations)")]
    QuadratureFailure { tol: f64, estimate: f64, evals: usize },

    #[error("temperature never exceeds the threshold {threshold:e}")]
    NoWater { threshold: f64 },

    #[error("temperature still positive at the right edge of the window (xi = {xi_edge})")]
    WindowTooSmall { xi_edge: f64 },

    #[error("fit window [{lo}, {hi}] holds {found} usable samples, need {needed}")]
    InsufficientSamples { lo: f64, hi: f64, found: usize, needed: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonFiniteData { .. } => "non_finite_data",
            Error::SpacingMismatch { .. } => "spacing_mismatch",
            Error::CflViolation { .. } => "cfl_violation",
            Error::NumericAbort { .. } => "numeric_abort",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::NoWater { .. } => "no_water",
            Error::WindowTooSmall { .. } => "window_too_small",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
