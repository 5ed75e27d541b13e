//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate covector: h(x, p) is not differentiable at p = 0")]
    DegenerateCovector,

    #[error("point pair exceeds the injectivity-scale bound ({sep:.3e} > {bound:.3e})")]
    DistanceOutOfRange { sep: f64, bound: f64 },

    #[error("ray did not exit the domain before t_max = {t_max}; geometry violates admissibility")]
    TrappedRay { t_max: f64 },

    #[error("tangential exit: transversality margin {margin:.3e} below threshold {threshold:.3e}")]
    TangentialExit { margin: f64, threshold: f64 },

    #[error("phase integrator failed after {halvings} step halvings: {reason}")]
    IntegratorFailure { halvings: u32, reason: String },

    #[error("evaluation point outside the beam support tube")]
    OutOfSupport,

    #[error("grid does not resolve the wavelength: step {step:.3e} exceeds {required:.3e}")]
    Resolution { step: f64, required: f64 },

    #[error("time window violated: ray span {span:.3} exceeds T = {t_final:.3}")]
    Window { span: f64, t_final: f64 },

    #[error("asymptotic erfc form refused for b = {b} (requires b > 1)")]
    ErfcAsymptoticRange { b: f64 },

    #[error("beam pair mismatch: {0}")]
    BeamPairMismatch(String),

    #[error("CFL violation: k = {k:.3e} exceeds stable step {limit:.3e}")]
    CflViolation { k: f64, limit: f64 },

    #[error("solver produced non-finite values at step {step} (t = {t:.4})")]
    Instability { step: usize, t: f64 },

    #[error("empty probe set for operator-norm estimation")]
    EmptyProbeSet,

    #[error("infeasible exponents: {0}")]
    InfeasibleExponents(String),

    #[error("minimizer bracket failed: {0}")]
    BracketFailure(String),

    #[error("tube chart cover failed: self-intersections denser than the interval resolution ({0})")]
    CoverFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
