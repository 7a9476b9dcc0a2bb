use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = WgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum WgError {
    #[error("parameter {0} outside [0, 1]")]
    Domain(f64),

    #[error("degenerate parametrization: zero speed at t = {0}")]
    DegenerateParametrization(f64),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("element {0} is not star shaped with respect to any sampled disc")]
    NotStarShaped(usize),

    #[error("arc moment quadrature on element {0} did not converge after 8 doublings")]
    QuadratureConvergence(usize),

    #[error("fan rule on element {0} has a nonpositive Jacobian")]
    FanDegeneracy(usize),

    #[error("element {element} is degenerate: {reason}")]
    DegenerateElement { element: usize, reason: String },

    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),

    #[error("problem specification: {0}")]
    Spec(String),

    #[error("matrix is not positive definite (p^T A p = {0:e})")]
    NotSpd(f64),

    #[error(
        "conjugate gradient did not converge in {} iterations (relative residual {:e})",
        .0.iterations,
        .0.relative_residual
    )]
    NonConvergence(SolveReport),

    #[error("refinement sequence: {0}")]
    Sequence(String),

    #[error("mesh file: {0}")]
    Format(String),

    #[error("unsupported mesh file version {0}")]
    UnsupportedVersion(i64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
