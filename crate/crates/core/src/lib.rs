//! Kinematics, statics, workspace analysis, control simulation and
//! soft-finger haptic rendering for a 4-DoF fingertip parallel mechanism
//! (x/y shear, z normal, twist about z).
//!
//! Units throughout: millimeters, radians, newtons, newton-millimeters.
//! File formats and the command-line boundary use degrees.

#[cfg(feature = "cli")]
pub mod cli;
pub mod control;
pub mod error;
pub mod fk;
pub mod geometry;
pub mod ik;
pub mod jacobian;
pub mod params;
pub mod render;
pub mod statics;
pub mod types;
pub mod workspace;

pub use error::KinematicsError;
pub use fk::{forward_kinematics_direct, forward_kinematics_iterative, FkMethod, FkResult};
pub use geometry::{base_point, constraint_residual, db_vector, upper_link_vector};
pub use ik::{home_pose, ijk_coefficients, inverse_kinematics, IjkCoefficients, IkSolution};
pub use jacobian::jacobian;
pub use params::{ConfigError, Leg, MechanismParams};
pub use types::{Branch, JointAngles, Pose, Wrench};
