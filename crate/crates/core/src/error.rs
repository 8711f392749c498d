use thiserror::Error;

/// Failures of the kinematic and static solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("pose unreachable: leg {leg} has negative discriminant {discriminant:.6e} mm^4")]
    Infeasible { leg: usize, discriminant: f64 },
    #[error("leg {leg} needs q = {angle:.6} rad, outside the joint limits")]
    JointLimit { leg: usize, angle: f64 },
    #[error("leg {leg} has degenerate coefficients and no finite root")]
    Singular { leg: usize },
    #[error("Newton refinement did not converge (residual {residual:.3e} mm^2 after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("no real twist root yields a consistent pose")]
    NoRealRoot,
    #[error("the linear position system is singular at every candidate twist")]
    DegenerateLinearSystem,
    #[error("singular configuration (normalized determinant {normalized_det:.3e})")]
    SingularConfiguration { normalized_det: f64 },
    #[error("direction lies in the null space of the Jacobian transpose")]
    FreeDirection,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
