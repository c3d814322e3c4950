use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value while {0}")]
    NonFinite(String),
    #[error("point outside the validity domain: {0}")]
    Domain(String),
    #[error("metric is numerically singular (condition number {0:.3e})")]
    SingularMetric(f64),
    #[error("degenerate level set: |grad V|_g = {0:.3e}")]
    DegenerateLevelSet(f64),
    #[error("unsupported surface: {0}")]
    UnsupportedSurface(String),
    #[error("perturbation too large for the linear decomposition: |h|_b = {0:.3e}")]
    SmallnessViolated(f64),
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("tail exponent n-1-2q = {0} must be negative")]
    InvalidExponent(f64),
    #[error("extrapolation unstable: difference ratio {0:.6}")]
    ExtrapolationUnstable(f64),
    #[error("tail bound {tail:.3e} dominates value {value:.3e}")]
    TailDominates { tail: f64, value: f64 },
    #[error("incompatible quadrature rule: {0}")]
    IncompatibleRule(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
