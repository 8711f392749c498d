use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::RenderError;

/// Scripted placement of a movable box at a time stamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t_s: f64,
    pub center: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBox {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    /// N/m.
    pub stiffness: f64,
    pub mu_static: f64,
    pub mu_dynamic: f64,
    pub grounded: bool,
    #[serde(default)]
    pub yaw_deg: f64,
    /// Ignored for grounded boxes. Linear interpolation, held at the ends.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<Keyframe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Limits {
    pub fn clamp(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|k, _| p[k].clamp(self.min[k], self.max[k]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub boxes: Vec<SceneBox>,
    pub workspace_limits: Limits,
}

/// Rigid placement of a box: world = center + Rz(yaw) * local.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub center: Vector3<f64>,
    pub yaw: f64,
}

impl Placement {
    fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
    }

    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().inverse() * (world - self.center)
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.center + self.rotation() * local
    }

    pub fn rotate(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * local
    }
}

impl SceneBox {
    pub fn half(&self) -> Vector3<f64> {
        Vector3::from(self.half_extents)
    }

    /// Force per mm of spring stretch, N/mm.
    pub fn stiffness_n_per_mm(&self) -> f64 {
        self.stiffness * 1e-3
    }

    pub fn placement(&self, t: f64) -> Placement {
        let rest = Placement {
            center: Vector3::from(self.center),
            yaw: self.yaw_deg.to_radians(),
        };
        if self.grounded || self.keyframes.is_empty() {
            return rest;
        }
        let frames = &self.keyframes;
        let at = |k: &Keyframe| Placement {
            center: Vector3::from(k.center),
            yaw: k.yaw_deg.to_radians(),
        };
        if t <= frames[0].t_s {
            return at(&frames[0]);
        }
        for pair in frames.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t <= b.t_s {
                let s = (t - a.t_s) / (b.t_s - a.t_s);
                let (pa, pb) = (at(a), at(b));
                return Placement {
                    center: pa.center.lerp(&pb.center, s),
                    yaw: pa.yaw + s * (pb.yaw - pa.yaw),
                };
            }
        }
        at(&frames[frames.len() - 1])
    }

    /// Signed distance from a local point to the box surface, mm; negative
    /// inside. Uses the box (Chebyshev) metric, exact on faces.
    pub fn signed_distance_local(&self, p: &Vector3<f64>) -> f64 {
        let h = self.half();
        let d = p.abs() - h;
        if d.iter().all(|&v| v <= 0.0) {
            d.max()
        } else {
            d.map(|v| v.max(0.0)).norm()
        }
    }

    pub fn signed_distance(&self, t: f64, world: &Vector3<f64>) -> f64 {
        self.signed_distance_local(&self.placement(t).to_local(world))
    }
}

impl Scene {
    pub fn from_json_str(text: &str) -> Result<Self, RenderError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| RenderError::InvalidScene(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, RenderError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |i: usize, why: &str| Err(RenderError::InvalidScene(format!("box {i}: {why}")));
        for (i, b) in self.boxes.iter().enumerate() {
            let finite = b.center.iter().chain(&b.half_extents).all(|v| v.is_finite());
            if !finite {
                return bad(i, "non-finite geometry");
            }
            if !b.half_extents.iter().all(|&h| h > 0.0) {
                return bad(i, "half extents must be positive");
            }
            if !(b.stiffness > 0.0 && b.stiffness.is_finite()) {
                return bad(i, "stiffness must be positive");
            }
            if !(b.mu_dynamic >= 0.0 && b.mu_static >= b.mu_dynamic && b.mu_static.is_finite()) {
                return bad(i, "friction requires mu_static >= mu_dynamic >= 0");
            }
            if b.keyframes.windows(2).any(|w| !(w[1].t_s > w[0].t_s)) {
                return bad(i, "keyframe times must increase");
            }
        }
        let l = &self.workspace_limits;
        if !(0..3).all(|k| l.min[k].is_finite() && l.max[k].is_finite() && l.min[k] <= l.max[k]) {
            return Err(RenderError::InvalidScene(
                "workspace_limits min must not exceed max".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab() -> SceneBox {
        SceneBox {
            center: [0.0, 0.0, -5.0],
            half_extents: [20.0, 20.0, 5.0],
            stiffness: 500.0,
            mu_static: 2.0,
            mu_dynamic: 1.8,
            grounded: true,
            yaw_deg: 0.0,
            keyframes: vec![],
        }
    }

    #[test]
    fn signed_distance_on_faces() {
        let b = slab();
        assert_eq!(b.signed_distance(0.0, &Vector3::new(0.0, 0.0, 2.0)), 2.0);
        assert_eq!(b.signed_distance(0.0, &Vector3::new(0.0, 0.0, -1.5)), -1.5);
        assert_eq!(b.signed_distance(0.0, &Vector3::new(3.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn keyframes_interpolate_and_hold() {
        let mut b = slab();
        b.grounded = false;
        b.keyframes = vec![
            Keyframe {
                t_s: 1.0,
                center: [0.0, 0.0, 0.0],
                yaw_deg: 0.0,
            },
            Keyframe {
                t_s: 3.0,
                center: [0.0, 4.0, 0.0],
                yaw_deg: 20.0,
            },
        ];
        assert_eq!(b.placement(0.0).center, Vector3::zeros());
        let mid = b.placement(2.0);
        assert!((mid.center.y - 2.0).abs() < 1e-12);
        assert!((mid.yaw - 10f64.to_radians()).abs() < 1e-12);
        assert_eq!(b.placement(9.0).center.y, 4.0);
        b.grounded = true;
        assert_eq!(b.placement(2.0).center.z, -5.0);
    }

    #[test]
    fn placement_roundtrip() {
        let p = Placement {
            center: Vector3::new(1.0, -2.0, 3.0),
            yaw: 0.7,
        };
        let w = Vector3::new(0.3, 5.0, -1.0);
        assert!((p.to_world(&p.to_local(&w)) - w).norm() < 1e-12);
    }

    #[test]
    fn scene_validation() {
        let json = r#"{"boxes":[{"center":[0,0,0],"half_extents":[1,1,1],"stiffness":500,
            "mu_static":1.0,"mu_dynamic":1.5,"grounded":true}],
            "workspace_limits":{"min":[-1,-1,-1],"max":[1,1,1]}}"#;
        assert!(matches!(Scene::from_json_str(json), Err(RenderError::InvalidScene(_))));
        let unknown = r#"{"boxes":[],"workspace_limits":{"min":[0,0,0],"max":[1,1,1]},"color":1}"#;
        assert!(Scene::from_json_str(unknown).is_err());
    }
}
