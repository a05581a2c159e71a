use thiserror::Error;

/// Errors raised by the model, the analytic amplitudes and the numerical drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown energy unit `{0}` (expected one of: a.u., eV, meV)")]
    UnknownUnit(String),

    #[error("the analytic amplitudes are only defined for flat-top envelopes")]
    UnsupportedEnvelope,

    #[error("continuum dipole from |b> vanishes for the {0} wave; amplitude ratio undefined")]
    ZeroDipole(&'static str),

    #[error("grid is not uniform (step {first} vs {other})")]
    NonUniformGrid { first: f64, other: f64 },

    #[error("no sign change of the asymmetry in the search window [{lo:.6}, {hi:.6}] a.u.")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("doublet analysis failed: {0}")]
    Analysis(String),

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("norm drift {drift:.3e} exceeds tolerance {tol:.1e}")]
    NormDrift { drift: f64, tol: f64 },

    #[error("requested grid [{lo:.6}, {hi:.6}] lies outside the continuum window [{wlo:.6}, {whi:.6}]")]
    OutsideWindow { lo: f64, hi: f64, wlo: f64, whi: f64 },

    #[error("quadrature did not converge: relative change {change:.3e} > tolerance {tol:.1e}")]
    Quadrature { change: f64, tol: f64 },

    #[error("deconvolution input is identically zero")]
    ZeroInput,

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
