//! Soft-finger haptic rendering: a god-object proxy per box, friction-cone
//! shear, and a torsional proxy without slip, streamed over a finger
//! trajectory.

pub mod contact;
pub mod scene;

use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contact::{contact_force, torsion_update, update_proxy, BoxContact, ContactState, Face};
pub use scene::{Keyframe, Limits, Placement, Scene, SceneBox};

use crate::types::Wrench;

/// 0.5 N·mm per degree, in N·mm/rad.
pub const DEFAULT_K_THETA: f64 = 0.5 * 180.0 / std::f64::consts::PI;
pub const MAX_SHEAR: f64 = 1.5;
pub const MAX_NORMAL: f64 = 2.0;
pub const MAX_TORQUE: f64 = 5.0;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("trajectory time must increase strictly (sample {index} at t = {t} s)")]
    NonMonotoneTime { index: usize, t: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerSample {
    pub t: f64,
    pub position: Vector3<f64>,
    /// rad.
    pub twist: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t_s: f64,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    twist_deg: f64,
}

/// Reads `t_s,x_mm,y_mm,z_mm,twist_deg`.
pub fn read_trajectory(reader: impl Read) -> Result<Vec<FingerSample>, RenderError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "x_mm", "y_mm", "z_mm", "twist_deg"] {
        return Err(RenderError::InvalidTrajectory(format!(
            "expected header t_s,x_mm,y_mm,z_mm,twist_deg, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: TrajectoryRow = row?;
        let s = FingerSample {
            t: r.t_s,
            position: Vector3::new(r.x_mm, r.y_mm, r.z_mm),
            twist: r.twist_deg.to_radians(),
        };
        if !(s.t.is_finite() && s.position.iter().all(|v| v.is_finite()) && s.twist.is_finite()) {
            return Err(RenderError::InvalidTrajectory(format!(
                "non-finite sample at row {}",
                out.len() + 1
            )));
        }
        out.push(s);
    }
    check_monotone(&out)?;
    Ok(out)
}

pub fn write_trajectory(samples: &[FingerSample], writer: impl Write) -> Result<(), RenderError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_s", "x_mm", "y_mm", "z_mm", "twist_deg"])?;
    for s in samples {
        w.write_record([
            format!("{:.4}", s.t),
            format!("{:.4}", s.position.x),
            format!("{:.4}", s.position.y),
            format!("{:.4}", s.position.z),
            format!("{:.4}", s.twist.to_degrees()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_monotone(samples: &[FingerSample]) -> Result<(), RenderError> {
    if samples.is_empty() {
        return Err(RenderError::EmptyTrajectory);
    }
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(RenderError::NonMonotoneTime {
                index: i + 1,
                t: w[1].t,
            });
        }
    }
    Ok(())
}

/// Device output limits: per-axis shear, normal and torsion.
pub fn clamp_to_device(w: &Wrench) -> Wrench {
    Wrench::new(
        w.fx.clamp(-MAX_SHEAR, MAX_SHEAR),
        w.fy.clamp(-MAX_SHEAR, MAX_SHEAR),
        w.fz.clamp(-MAX_NORMAL, MAX_NORMAL),
        w.tz.clamp(-MAX_TORQUE, MAX_TORQUE),
    )
}

/// One rendered sample with the diagnostics the trace checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderStep {
    pub t: f64,
    /// Clamped output.
    pub wrench: Wrench,
    /// Sum of per-box wrenches before clamping.
    pub raw: Wrench,
    /// Smallest signed distance of any in-contact proxy to any box, mm.
    /// Infinite when nothing is in contact.
    pub min_proxy_distance: f64,
    /// Largest `|f_t| - mu_s |f_n|` over the contacts, N.
    pub cone_excess: f64,
    pub contacts: Vec<ContactState>,
}

/// Streaming renderer; one per trajectory.
#[derive(Debug, Clone)]
pub struct Renderer<'a> {
    scene: &'a Scene,
    k_theta: f64,
    states: Vec<BoxContact>,
    last_t: Option<f64>,
}

impl<'a> Renderer<'a> {
    pub fn new(scene: &'a Scene, k_theta: f64) -> Self {
        Self {
            scene,
            k_theta,
            states: vec![BoxContact::FREE; scene.boxes.len()],
            last_t: None,
        }
    }

    pub fn states(&self) -> &[BoxContact] {
        &self.states
    }

    pub fn step(&mut self, sample: &FingerSample) -> Result<RenderStep, RenderError> {
        if let Some(prev) = self.last_t {
            if !(sample.t > prev) {
                return Err(RenderError::NonMonotoneTime { index: 0, t: sample.t });
            }
        }
        self.last_t = Some(sample.t);
        let finger = FingerSample {
            position: self.scene.workspace_limits.clamp(&sample.position),
            ..*sample
        };
        let mut raw = Wrench::ZERO;
        let mut min_proxy_distance = f64::INFINITY;
        let mut cone_excess = f64::NEG_INFINITY;
        let mut contacts = Vec::with_capacity(self.states.len());
        for (body, state) in self.scene.boxes.iter().zip(self.states.iter_mut()) {
            let placement = body.placement(finger.t);
            *state = update_proxy(body, &placement, state, &finger);
            let mut w = contact_force(body, &placement, state, &finger);
            w.tz = torsion_update(state, &placement, &finger, self.k_theta);
            raw = raw + w;
            let view = ContactState::view(state, &placement, &finger);
            if state.in_contact() {
                let proxy = Vector3::from(view.proxy_position);
                for other in &self.scene.boxes {
                    min_proxy_distance = min_proxy_distance.min(other.signed_distance(finger.t, &proxy));
                }
                let (fn_mag, ft_mag) = contact::split_force(state, &placement, &w.force());
                cone_excess = cone_excess.max(ft_mag - body.mu_static * fn_mag);
            }
            contacts.push(view);
        }
        Ok(RenderStep {
            t: finger.t,
            wrench: clamp_to_device(&raw),
            raw,
            min_proxy_distance,
            cone_excess: cone_excess.max(0.0),
            contacts,
        })
    }
}

/// Renders a whole trajectory, one output row per input sample.
pub fn render_trajectory(
    scene: &Scene,
    trajectory: &[FingerSample],
    k_theta: f64,
) -> Result<Vec<RenderStep>, RenderError> {
    check_monotone(trajectory)?;
    let mut r = Renderer::new(scene, k_theta);
    trajectory.iter().map(|s| r.step(s)).collect()
}

/// `t_s,fx_N,fy_N,fz_N,tz_Nmm`.
pub fn trace_csv(steps: &[RenderStep]) -> String {
    let mut out = String::from("t_s,fx_N,fy_N,fz_N,tz_Nmm\n");
    for s in steps {
        let w = &s.wrench;
        out.push_str(&format!("{:.4},{:.6},{:.6},{:.6},{:.6}\n", s.t, w.fx, w.fy, w.fz, w.tz));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    Shear,
    Normal,
    Torsion,
}

/// RMS of shear magnitude, normal force and torque over `[t0, t1]`, each
/// divided by its device limit.
pub fn normalized_rms(steps: &[RenderStep], t0: f64, t1: f64) -> [(Component, f64); 3] {
    let window: Vec<&Wrench> = steps
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| &s.wrench)
        .collect();
    let n = window.len().max(1) as f64;
    let rms = |f: &dyn Fn(&Wrench) -> f64| (window.iter().map(|w| f(w).powi(2)).sum::<f64>() / n).sqrt();
    [
        (Component::Shear, rms(&|w| w.fx.hypot(w.fy)) / MAX_SHEAR),
        (Component::Normal, rms(&|w| w.fz) / MAX_NORMAL),
        (Component::Torsion, rms(&|w| w.tz) / MAX_TORQUE),
    ]
}

pub fn dominant_component(steps: &[RenderStep], t0: f64, t1: f64) -> Component {
    let r = normalized_rms(steps, t0, t1);
    r.iter().fold(r[0], |best, c| if c.1 > best.1 { *c } else { best }).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene {
            boxes: vec![SceneBox {
                center: [0.0, 0.0, -10.0],
                half_extents: [30.0, 30.0, 10.0],
                stiffness: 500.0,
                mu_static: 2.0,
                mu_dynamic: 1.8,
                grounded: true,
                yaw_deg: 0.0,
                keyframes: vec![],
            }],
            workspace_limits: Limits {
                min: [-3.5, -4.5, -3.5],
                max: [3.5, 4.5, 3.5],
            },
        }
    }

    fn sample(t: f64, x: f64, y: f64, z: f64) -> FingerSample {
        FingerSample {
            t,
            position: Vector3::new(x, y, z),
            twist: 0.0,
        }
    }

    #[test]
    fn free_space_trace_is_zero() {
        let traj: Vec<_> = (0..50)
            .map(|i| sample(i as f64 * 0.01, 0.0, 0.0, 1.0 + 0.01 * i as f64))
            .collect();
        let steps = render_trajectory(&scene(), &traj, DEFAULT_K_THETA).unwrap();
        assert!(steps.iter().all(|s| s.wrench == Wrench::ZERO));
    }

    #[test]
    fn non_monotone_rejected() {
        let traj = vec![sample(0.0, 0.0, 0.0, 1.0), sample(0.0, 0.0, 0.0, 1.0)];
        assert!(matches!(
            render_trajectory(&scene(), &traj, DEFAULT_K_THETA),
            Err(RenderError::NonMonotoneTime { index: 1, .. })
        ));
        assert!(matches!(
            render_trajectory(&scene(), &[], 1.0),
            Err(RenderError::EmptyTrajectory)
        ));
    }

    #[test]
    fn workspace_limits_cap_penetration() {
        let steps = render_trajectory(&scene(), &[sample(0.0, 0.0, 0.0, -10.0)], DEFAULT_K_THETA).unwrap();
        assert!((steps[0].raw.fz - 1.75).abs() < 1e-12);
    }

    #[test]
    fn output_is_clamped() {
        let w = clamp_to_device(&Wrench::new(3.0, -2.0, 2.5, -9.0));
        assert_eq!(w, Wrench::new(1.5, -1.5, 2.0, -5.0));
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let traj = vec![sample(0.0, 1.0, 2.0, 3.0), sample(0.5, -1.0, 0.25, 0.0)];
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
        let bad = "t,x,y,z,twist\n0,0,0,0,0\n";
        assert!(matches!(
            read_trajectory(bad.as_bytes()),
            Err(RenderError::InvalidTrajectory(_))
        ));
    }

    #[test]
    fn trace_header() {
        let steps = render_trajectory(&scene(), &[sample(0.0, 0.0, 0.0, 1.0)], 1.0).unwrap();
        assert_eq!(
            trace_csv(&steps),
            "t_s,fx_N,fy_N,fz_N,tz_Nmm\n0.0000,0.000000,0.000000,0.000000,0.000000\n"
        );
    }
}
