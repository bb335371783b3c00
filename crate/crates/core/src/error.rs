use thiserror::Error;

/// Errors raised by the numerical library.
///
/// Infeasible power decisions are not errors; they are reported through
/// [`crate::control::PowerDecision`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "beam footprint is not bounded: pointing elevation {theta_hat} rad with \
         elevation beamwidth {delta_theta} rad reaches the horizon"
    )]
    HorizonGrazing { theta_hat: f64, delta_theta: f64 },

    #[error("beam too wide: target gain {a0} is not reachable with this aperture (arcsin argument {argument})")]
    BeamTooWide { a0: f64, argument: f64 },

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate ellipse: semi-axes ({semi_major}, {semi_minor})")]
    DegenerateEllipse { semi_major: f64, semi_minor: f64 },

    #[error("quantile unresolvable: {tail_samples:.1} expected tail samples, need at least 30")]
    QuantileUnresolvable { tail_samples: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("table error: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError(e.to_string()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
