use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("Fermi momentum must be non-negative, got {0}")]
    NegativeFermiMomentum(f64),
    #[error("metric breakdown at x = {x}: e^lambda = {numerator} / {denominator} is not positive")]
    MetricBreakdown { x: f64, numerator: f64, denominator: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("actual infinity must exceed 1, got {0}")]
    InvalidDomain(f64),
    #[error("need at least 4 subintervals, got {0}")]
    TooFewIntervals(usize),
    #[error("grading strength must be finite and at least 1, got {0}")]
    InvalidGrading(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollocationError {
    #[error("x = {x} lies outside [0, {x_max}]")]
    OutOfRange { x: f64, x_max: f64 },
    #[error("singular collocation matrix: pivot {pivot:e} in column {column}")]
    Singular { column: usize, pivot: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Collocation(#[from] CollocationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("degenerate eigen-direction system: determinant {det:e}")]
    DegenerateEigenSystem { det: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("Runge order undefined: difference ratio {ratio} is not positive")]
    OrderUndefined { ratio: f64 },
    #[error("Runge order undefined: medium and fine values coincide")]
    ZeroDenominator,
    #[error("need at least {needed} entries, got {got}")]
    TooFewEntries { needed: usize, got: usize },
}
