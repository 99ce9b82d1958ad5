use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("derivative of order {order} unavailable for {kind}")]
    DerivativeUnavailable { kind: String, order: usize },
    #[error("non-positive multiplier value m({r}) = {value}")]
    NonPositive { r: f64, value: f64 },
    #[error("{what} did not converge (best {best}, error estimate {error})")]
    Convergence { what: String, best: f64, error: f64 },
    #[error("Bessel tail did not converge after {zeros} zeros; last partial sums {partial:?}")]
    BesselTail { zeros: usize, partial: Vec<f64> },
    #[error("osgood classification indeterminate: {0}")]
    Indeterminate(String),
    #[error("rho = {rho} outside table range [{lo}, {hi}]")]
    Range { rho: f64, lo: f64, hi: f64 },
    #[error("kernel table build failed at nodes {0:?}")]
    TableBuild(Vec<usize>),
    #[error("contact imminent: gap {gap} below threshold {threshold}")]
    Contact { gap: f64, threshold: f64 },
    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("self-intersecting contour in patch {0}")]
    SelfIntersection(usize),
    #[error("point {0:?} too close to a contour or singular configuration")]
    Proximity([f64; 2]),
    #[error("no finite collision time: {0}")]
    NoFiniteCollision(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config invariant violated: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
