use thiserror::Error;

/// Errors raised across the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("collocation grid too coarse: {samples} samples cannot resolve degree {degree} (need at least {required})")]
    GridTooCoarse {
        samples: usize,
        degree: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("det(A+B) vanishes within tolerance ({det:e}); the sign s(A+B) is undefined")]
    DegenerateCertificate { det: f64 },

    #[error("matrix is singular within tolerance (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("field evaluated outside its domain of definition at t = {t}")]
    DomainEscape { t: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton Jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("solution left the admissible bound |u| <= {bound} at t = {t}")]
    BlowUp { t: f64, bound: f64 },

    #[error("step {dt} does not divide the delay {tau}")]
    StepMisfit { dt: f64, tau: f64 },

    #[error("delay {tau} exceeds the period {period}")]
    DelayExceedsPeriod { tau: f64, period: f64 },

    #[error("linearisation is resonant: Floquet multiplier {multiplier} lies within {tol:e} of 1")]
    ResonantLinearisation { multiplier: f64, tol: f64 },

    #[error("1 is a Floquet multiplier of u' = Mu (det(I - e^(TM)) = {det:e})")]
    FloquetOne { det: f64 },

    #[error("point is not on the boundary of the domain")]
    NotOnBoundary,

    #[error("boundary condition <G(x), nu(x)> < 0 fails (worst margin {worst:e})")]
    WeakConditionFails { worst: f64 },

    #[error("equilibrium residual |g(e,e)| = {residual:e} exceeds tolerance")]
    NotAnEquilibrium { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
