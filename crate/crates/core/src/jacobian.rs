//! Task-space Jacobian by implicit differentiation of the four closure
//! residuals: `A p_dot = B q_dot` with `A = dr/dp` and `B = -dr/dq`.

use nalgebra::{Matrix4, Vector4};

use crate::error::KinematicsError;
use crate::geometry::{db_vector_derivative, parallelogram_vector, upper_link_derivative};
use crate::params::{Leg, MechanismParams};
use crate::types::{JointAngles, Pose};

/// Below this, `det(A) / prod(|row|)` counts as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// `dr/dp`, rows per leg, columns `(x, y, z, theta)`.
pub fn pose_partials(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    for leg in Leg::ALL {
        let i = leg.index();
        let w = parallelogram_vector(params, leg, pose, q.q[i]);
        a[(i, 0)] = 2.0 * w.x;
        a[(i, 1)] = 2.0 * w.y;
        a[(i, 2)] = 2.0 * w.z;
        a[(i, 3)] = 2.0 * w.dot(&db_vector_derivative(params, leg, pose.theta));
    }
    a
}

/// Diagonal of `dr/dq` (each residual depends on its own joint only).
pub fn joint_partials(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> Vector4<f64> {
    Vector4::from_fn(|i, _| {
        let leg = Leg::ALL[i];
        let w = parallelogram_vector(params, leg, pose, q.q[i]);
        -2.0 * w.dot(&upper_link_derivative(params, leg, q.q[i]))
    })
}

/// Determinant of `A` divided by the product of its row norms; 1 for
/// orthogonal rows, 0 at a singularity.
pub fn normalized_determinant(a: &Matrix4<f64>) -> f64 {
    let scale: f64 = (0..4).map(|i| a.row(i).norm()).product();
    if scale == 0.0 {
        return 0.0;
    }
    a.determinant() / scale
}

/// `J` with `p_dot = J q_dot`; rows `(x, y, z, theta)` in mm/rad and rad/rad.
pub fn jacobian(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> Result<Matrix4<f64>, KinematicsError> {
    let a = pose_partials(params, pose, q);
    let normalized_det = normalized_determinant(&a);
    if !(normalized_det.abs() >= SINGULARITY_THRESHOLD) {
        return Err(KinematicsError::SingularConfiguration { normalized_det });
    }
    let a_inv = a
        .try_inverse()
        .ok_or(KinematicsError::SingularConfiguration { normalized_det })?;
    let dr_dq = joint_partials(params, pose, q);
    Ok(-a_inv * Matrix4::from_diagonal(&dr_dq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ik::{home_pose, inverse_kinematics};

    #[test]
    fn centered_pose_antisymmetry() {
        let p = MechanismParams::default();
        let home = home_pose(&p);
        for dz in [-2.0, 0.0, 1.5] {
            let pose = Pose::new(0.0, 0.0, home.z + dz, 0.0);
            let q = inverse_kinematics(&p, &pose, None).into_joints().unwrap();
            let j = jacobian(&p, &pose, &q).unwrap();
            assert!((j[(0, 0)] + j[(0, 2)]).abs() < 1e-12 * j[(0, 0)].abs().max(1.0), "{j}");
            assert!((j[(1, 1)] + j[(1, 3)]).abs() < 1e-12 * j[(1, 1)].abs().max(1.0), "{j}");
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let mut a = Matrix4::identity();
        a.set_row(3, &a.row(2).clone_owned());
        assert_eq!(normalized_determinant(&a), 0.0);
    }
}
