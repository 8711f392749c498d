//! Vector quantities of each kinematic chain and the loop-closure residual.
//!
//! Leg `i` closes when `|p + DB_i(theta) - P_i - P_iA_i(q_i)|^2 = l^2`, where
//! `p` is the tactor position, `DB_i` the plate-center to leg-joint offset,
//! `P_i` the actuated joint and `P_iA_i` the upper link.

use nalgebra::{Vector3, Vector4};

use crate::params::{Leg, MechanismParams};
use crate::types::{JointAngles, Pose};

/// Offset from the plate center `D` to the leg joint `B_i` at twist `theta`.
pub fn db_vector(params: &MechanismParams, leg: Leg, theta: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    let half_h = 0.5 * params.bar_length;
    let dx = params.plate_half_x + 0.5 * params.bar_offset;
    let dy = params.plate_half_y;
    match leg {
        Leg::One => Vector3::new(-half_h * s + dx, half_h * c + dy, 0.0),
        Leg::Two => Vector3::new(-half_h * s - dx, half_h * c + dy, 0.0),
        Leg::Three => Vector3::new(half_h * s - dx, -half_h * c - dy, 0.0),
        Leg::Four => Vector3::new(half_h * s + dx, -half_h * c - dy, 0.0),
    }
}

/// `d DB_i / d theta`.
pub fn db_vector_derivative(params: &MechanismParams, leg: Leg, theta: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    let half_h = 0.5 * params.bar_length;
    match leg {
        Leg::One | Leg::Two => Vector3::new(-half_h * c, -half_h * s, 0.0),
        Leg::Three | Leg::Four => Vector3::new(half_h * c, half_h * s, 0.0),
    }
}

/// Center of the actuated joint `P_i`.
pub fn base_point(params: &MechanismParams, leg: Leg) -> Vector3<f64> {
    let (s, c) = params.azimuths[leg.index()].sin_cos();
    Vector3::new(params.base_radius * c, params.base_radius * s, params.base_z)
}

/// Upper link `P_iA_i` at actuated angle `q`. Positive `q` swings the link toward -z.
pub fn upper_link_vector(params: &MechanismParams, leg: Leg, q: f64) -> Vector3<f64> {
    let (sp, cp) = params.azimuths[leg.index()].sin_cos();
    let (sq, cq) = q.sin_cos();
    params.upper_link * Vector3::new(cp * cq, sp * cq, -sq)
}

/// `d P_iA_i / d q`.
pub fn upper_link_derivative(params: &MechanismParams, leg: Leg, q: f64) -> Vector3<f64> {
    let (sp, cp) = params.azimuths[leg.index()].sin_cos();
    let (sq, cq) = q.sin_cos();
    params.upper_link * Vector3::new(-cp * sq, -sp * sq, -cq)
}

/// Parallelogram vector `A_iB_i` for a given pose and joint angle.
pub fn parallelogram_vector(params: &MechanismParams, leg: Leg, pose: &Pose, q: f64) -> Vector3<f64> {
    pose.position() + db_vector(params, leg, pose.theta) - base_point(params, leg) - upper_link_vector(params, leg, q)
}

/// Per-leg closure residual `|A_iB_i|^2 - l^2` in mm².
pub fn constraint_residual(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> Vector4<f64> {
    let l2 = params.lower_link * params.lower_link;
    Vector4::from_fn(|i, _| {
        let leg = Leg::ALL[i];
        parallelogram_vector(params, leg, pose, q.q[i]).norm_squared() - l2
    })
}
