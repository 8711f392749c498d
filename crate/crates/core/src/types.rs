use std::f64::consts::PI;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Task-space coordinate of the tactor: position in mm, twist `theta` in rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self { x, y, z, theta }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, self.theta)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.theta.is_finite()
    }

    /// Same pose with `theta` wrapped into `(-pi, pi]`.
    pub fn normalized(self) -> Self {
        Self {
            theta: wrap_angle(self.theta),
            ..self
        }
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.position() - other.position()).norm()
    }

    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        wrap_angle(self.theta - other.theta).abs()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Which root of the half-angle quadratic a leg uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    #[default]
    Minus,
    Plus,
}

/// Actuated joint angles (rad) with the IK branch each came from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub q: [f64; 4],
    pub branch: [Branch; 4],
}

impl JointAngles {
    pub fn new(q: [f64; 4]) -> Self {
        Self {
            q,
            branch: [Branch::Minus; 4],
        }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.q)
    }

    pub fn max_abs_diff(&self, other: &JointAngles) -> f64 {
        self.q
            .iter()
            .zip(other.q.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Force (N) plus torque about z (N·mm) at the tactor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tz: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        fx: 0.0,
        fy: 0.0,
        fz: 0.0,
        tz: 0.0,
    };

    pub fn new(fx: f64, fy: f64, fz: f64, tz: f64) -> Self {
        Self { fx, fy, fz, tz }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.fx, self.fy, self.fz, self.tz)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.fx * s, self.fy * s, self.fz * s, self.tz * s)
    }

    pub fn is_zero(&self) -> bool {
        self.fx == 0.0 && self.fy == 0.0 && self.fz == 0.0 && self.tz == 0.0
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.fx + o.fx, self.fy + o.fy, self.fz + o.fz, self.tz + o.tz)
    }
}
