use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({q1}, {q2}) lies outside the chart domain")]
    Domain { q1: f64, q2: f64 },

    #[error("degenerate parametrization at ({q1}, {q2}): det g = {det:e}")]
    SingularChart { q1: f64, q2: f64, det: f64 },

    #[error("finite-difference step {step:e} is too small for coordinate magnitude {scale:e}")]
    StepSize { step: f64, scale: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("helix harmonic Omega*r = {value} is not within 1e-6 of an integer")]
    Periodicity { value: f64 },

    #[error("under-resolved grid: {reason}")]
    Resolution { reason: String },

    #[error("unsupported domain: {reason}")]
    UnsupportedDomain { reason: String },

    #[error("incident channel l = {mode} is closed at E = {energy} (threshold {threshold})")]
    ClosedChannel { mode: i32, energy: f64, threshold: f64 },

    #[error("polarization undefined: total conductance is zero")]
    UndefinedPolarization,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::UndefinedPolarization)
    }
}
