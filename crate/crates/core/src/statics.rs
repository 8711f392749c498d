//! Jacobian-transpose statics and force/torque capacity.
//!
//! With `J` mapping joint rates to `(x_dot, y_dot, z_dot, theta_dot)` in mm/s
//! and rad/s, the joint torques balancing a tactor wrench are `tau = J^T w`.
//! The rotational row of `J` is a rad/rad ratio, so the wrench torque in N·mm
//! pairs with it directly and every `tau_i` comes out in N·mm.

use nalgebra::Vector4;
use serde::Serialize;

use crate::error::KinematicsError;
use crate::ik::{home_pose, inverse_kinematics};
use crate::jacobian::jacobian;
use crate::params::MechanismParams;
use crate::types::{JointAngles, Pose, Wrench};

pub fn joint_torques_for_wrench(
    params: &MechanismParams,
    pose: &Pose,
    q: &JointAngles,
    wrench: &Wrench,
) -> Result<Vector4<f64>, KinematicsError> {
    let j = jacobian(params, pose, q)?;
    Ok(j.transpose() * wrench.to_vector())
}

/// Wrench balanced by a set of joint torques, `w = J^-T tau`.
pub fn wrench_for_joint_torques(
    params: &MechanismParams,
    pose: &Pose,
    q: &JointAngles,
    torques: &Vector4<f64>,
) -> Result<Wrench, KinematicsError> {
    let j = jacobian(params, pose, q)?;
    let jt = j.transpose();
    let w = jt
        .lu()
        .solve(torques)
        .ok_or(KinematicsError::SingularConfiguration { normalized_det: 0.0 })?;
    Ok(Wrench::from_vector(&w))
}

/// Largest `alpha >= 0` such that the wrench `alpha * direction` keeps every
/// joint torque within `tau_max`. `direction` is normalized first.
pub fn max_wrench(
    params: &MechanismParams,
    pose: &Pose,
    q: &JointAngles,
    direction: &Vector4<f64>,
) -> Result<f64, KinematicsError> {
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(KinematicsError::InvalidArgument(
            "direction must be a nonzero finite vector".into(),
        ));
    }
    let unit = direction / norm;
    let j = jacobian(params, pose, q)?;
    let tau = j.transpose() * unit;
    let worst = tau.amax();
    // Relative to the size of J^T so the test is unit-free.
    if worst <= 1e-14 * j.amax() {
        return Err(KinematicsError::FreeDirection);
    }
    Ok(params.tau_max / worst)
}

/// The eight signed axis directions of the capacity report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisDirection {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
    ZPlus,
    ZMinus,
    ThetaPlus,
    ThetaMinus,
}

impl AxisDirection {
    pub const ALL: [AxisDirection; 8] = [
        AxisDirection::XPlus,
        AxisDirection::XMinus,
        AxisDirection::YPlus,
        AxisDirection::YMinus,
        AxisDirection::ZPlus,
        AxisDirection::ZMinus,
        AxisDirection::ThetaPlus,
        AxisDirection::ThetaMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AxisDirection::XPlus => "x+",
            AxisDirection::XMinus => "x-",
            AxisDirection::YPlus => "y+",
            AxisDirection::YMinus => "y-",
            AxisDirection::ZPlus => "z+",
            AxisDirection::ZMinus => "z-",
            AxisDirection::ThetaPlus => "theta+",
            AxisDirection::ThetaMinus => "theta-",
        }
    }

    pub fn vector(self) -> Vector4<f64> {
        match self {
            AxisDirection::XPlus => Vector4::new(1.0, 0.0, 0.0, 0.0),
            AxisDirection::XMinus => Vector4::new(-1.0, 0.0, 0.0, 0.0),
            AxisDirection::YPlus => Vector4::new(0.0, 1.0, 0.0, 0.0),
            AxisDirection::YMinus => Vector4::new(0.0, -1.0, 0.0, 0.0),
            AxisDirection::ZPlus => Vector4::new(0.0, 0.0, 1.0, 0.0),
            AxisDirection::ZMinus => Vector4::new(0.0, 0.0, -1.0, 0.0),
            AxisDirection::ThetaPlus => Vector4::new(0.0, 0.0, 0.0, 1.0),
            AxisDirection::ThetaMinus => Vector4::new(0.0, 0.0, 0.0, -1.0),
        }
    }

    /// N for forces, N·mm for the twist directions.
    pub fn unit(self) -> &'static str {
        match self {
            AxisDirection::ThetaPlus | AxisDirection::ThetaMinus => "N*mm",
            _ => "N",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityEntry {
    pub direction: &'static str,
    pub capacity: f64,
    pub unit: &'static str,
}

/// Capacity along every signed axis at a pose.
pub fn capacity_report(params: &MechanismParams, pose: &Pose) -> Result<Vec<CapacityEntry>, KinematicsError> {
    let q = inverse_kinematics(params, pose, None).into_joints()?;
    AxisDirection::ALL
        .iter()
        .map(|&dir| {
            Ok(CapacityEntry {
                direction: dir.label(),
                capacity: max_wrench(params, pose, &q, &dir.vector())?,
                unit: dir.unit(),
            })
        })
        .collect()
}

/// CSV form `direction,capacity`.
pub fn capacity_csv(entries: &[CapacityEntry]) -> String {
    let mut out = String::from("direction,capacity\n");
    for e in entries {
        out.push_str(&format!("{},{:.6}\n", e.direction, e.capacity));
    }
    out
}

/// Torque limit that makes the capacity along `direction` at `pose` equal
/// `target`. Capacity is linear in `tau_max`, so one evaluation suffices.
pub fn calibrate_tau_max(
    params: &MechanismParams,
    pose: &Pose,
    direction: &Vector4<f64>,
    target: f64,
) -> Result<f64, KinematicsError> {
    let q = inverse_kinematics(params, pose, None).into_joints()?;
    let mut unit_params = params.clone();
    unit_params.tau_max = 1.0;
    let per_unit = max_wrench(&unit_params, pose, &q, direction)?;
    Ok(target / per_unit)
}

/// Normal-force capacity the default torque limit is calibrated to, N.
pub const HOME_Z_CAPACITY: f64 = 1.39;

/// `tau_max` giving [`HOME_Z_CAPACITY`] of +z force at the home pose.
pub fn home_calibrated_tau_max(params: &MechanismParams) -> Result<f64, KinematicsError> {
    calibrate_tau_max(
        params,
        &home_pose(params),
        &AxisDirection::ZPlus.vector(),
        HOME_Z_CAPACITY,
    )
}
