//! Per-motor PID position loop on a damped-inertia motor model.
//!
//! Plant per motor: `J_m * a = tau - b_m * v`, with `J_m` in kg·mm², `b_m` in
//! N·mm·s/rad and `tau` in N·mm. One N·mm is 1000 kg·mm²/s², hence the
//! factor in [`MotorPlant::accel_per_torque`].

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::KinematicsError;
use crate::fk::{forward_kinematics_direct, forward_kinematics_iterative};
use crate::ik::inverse_kinematics;
use crate::jacobian::jacobian;
use crate::params::MechanismParams;
use crate::types::{JointAngles, Pose, Wrench};

pub const LOOP_RATE_HZ: f64 = 1900.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorPlant {
    /// kg·mm².
    pub inertia: f64,
    /// N·mm·s/rad.
    pub damping: f64,
}

impl Default for MotorPlant {
    fn default() -> Self {
        Self {
            inertia: 1e-3,
            damping: 0.01,
        }
    }
}

impl MotorPlant {
    /// rad/s² per N·mm.
    pub fn accel_per_torque(&self) -> f64 {
        1000.0 / self.inertia
    }

    /// 1/s.
    pub fn damping_rate(&self) -> f64 {
        1000.0 * self.damping / self.inertia
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    /// N·mm/rad.
    pub kp: f64,
    /// N·mm/(rad·s).
    pub ki: f64,
    /// N·mm·s/rad.
    pub kd: f64,
}

impl PidGains {
    /// Critically damped PI loop at `bandwidth_hz` on the damping-dominated
    /// plant `b s theta = tau`: `s² + (kp/b) s + ki/b` with a double root at
    /// `-w`. The inertia pole sits near `b/J` (1e4 rad/s by default), far
    /// above the loop, so it is neglected and no derivative term is needed.
    pub fn critically_damped(plant: &MotorPlant, bandwidth_hz: f64) -> Self {
        let w = std::f64::consts::TAU * bandwidth_hz;
        Self {
            kp: 2.0 * plant.damping * w,
            ki: plant.damping * w * w,
            kd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.kp) && ok(self.ki) && ok(self.kd) {
            Ok(())
        } else {
            Err(ControlError::InvalidArgument(format!(
                "gains must be finite and non-negative: {self:?}"
            )))
        }
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::critically_damped(&MotorPlant::default(), DEFAULT_BANDWIDTH_HZ)
    }
}

/// Monotone affine map from motor angle to leg joint angle,
/// `q = offset + ratio * motor`. Identity by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmission {
    pub ratio: f64,
    pub offset: f64,
}

impl Default for Transmission {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            offset: 0.0,
        }
    }
}

impl Transmission {
    pub fn leg_angle(&self, motor: f64) -> f64 {
        self.offset + self.ratio * motor
    }

    pub fn motor_angle(&self, leg: f64) -> f64 {
        (leg - self.offset) / self.ratio
    }

    /// Motor torque delivering `leg_torque` at the joint.
    pub fn motor_torque(&self, leg_torque: f64) -> f64 {
        self.ratio * leg_torque
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MotorState {
    /// rad.
    pub angle: f64,
    /// rad/s.
    pub velocity: f64,
    /// rad·s.
    pub integral_error: f64,
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("desired pose at t = {t} s is not reachable: {source}")]
    Infeasible { t: f64, source: KinematicsError },
    #[error("trajectory time must increase strictly (sample {index})")]
    NonMonotoneTime { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Deserialize)]
struct PoseRow {
    t_s: f64,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    theta_deg: f64,
}

/// Reads a desired-pose trajectory `t_s,x_mm,y_mm,z_mm,theta_deg`.
pub fn read_pose_trajectory(reader: impl std::io::Read) -> Result<Vec<(f64, Pose)>, ControlError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "x_mm", "y_mm", "z_mm", "theta_deg"] {
        return Err(ControlError::InvalidArgument(
            "pose trajectory header must be t_s,x_mm,y_mm,z_mm,theta_deg".into(),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: PoseRow = row?;
        let pose = Pose::new(r.x_mm, r.y_mm, r.z_mm, r.theta_deg.to_radians());
        if !(r.t_s.is_finite() && pose.is_finite()) {
            return Err(ControlError::InvalidArgument(format!(
                "non-finite sample at row {}",
                out.len() + 1
            )));
        }
        out.push((r.t_s, pose));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Controller {
    pub gains: PidGains,
    pub plant: MotorPlant,
    pub transmission: Transmission,
}

impl Controller {
    pub fn integral_clamp(&self, tau_max: f64) -> f64 {
        if self.gains.ki > 0.0 {
            tau_max / self.gains.ki
        } else {
            0.0
        }
    }

    pub fn leg_angles(&self, motors: &[MotorState; 4]) -> JointAngles {
        JointAngles::new(motors.map(|m| self.transmission.leg_angle(m.angle)))
    }

    pub fn motors_at(&self, q: &JointAngles) -> [MotorState; 4] {
        q.q.map(|qi| MotorState {
            angle: self.transmission.motor_angle(qi),
            ..MotorState::default()
        })
    }
}

/// One loop tick: PID toward `q_desired` plus `J^T w` feedforward (motor
/// side), saturated at `±tau_max`, then semi-implicit Euler on the plant with
/// the damping term taken implicitly.
///
/// `ff_state` supplies the pose and leg angles at which the Jacobian is
/// evaluated; it is only needed for a nonzero `wrench_ff`.
pub fn step_control(
    params: &MechanismParams,
    ctl: &Controller,
    motors: &[MotorState; 4],
    q_desired: &JointAngles,
    wrench_ff: &Wrench,
    ff_state: Option<(&Pose, &JointAngles)>,
    dt: f64,
) -> Result<([MotorState; 4], Vector4<f64>), ControlError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let ff = if wrench_ff.is_zero() {
        Vector4::zeros()
    } else {
        let (pose, q) = ff_state.ok_or_else(|| {
            ControlError::InvalidArgument("wrench feedforward needs the current pose and joint angles".into())
        })?;
        jacobian(params, pose, q)?.transpose() * wrench_ff.to_vector()
    };
    let g = ctl.gains;
    let clamp = ctl.integral_clamp(params.tau_max);
    let a = ctl.plant.accel_per_torque();
    let beta = ctl.plant.damping_rate();
    let mut next = *motors;
    let mut torques = Vector4::zeros();
    for i in 0..4 {
        let m = motors[i];
        let target = ctl.transmission.motor_angle(q_desired.q[i]);
        let e = target - m.angle;
        let integral = (m.integral_error + e * dt).clamp(-clamp, clamp);
        let pid = g.kp * e + g.ki * integral - g.kd * m.velocity;
        let tau = (pid + ctl.transmission.motor_torque(ff[i])).clamp(-params.tau_max, params.tau_max);
        let velocity = (m.velocity + dt * a * tau) / (1.0 + dt * beta);
        next[i] = MotorState {
            angle: m.angle + dt * velocity,
            velocity,
            integral_error: integral,
        };
        torques[i] = tau;
    }
    Ok((next, torques))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub desired: Pose,
    pub actual: Pose,
    pub q: JointAngles,
    pub torques: Vector4<f64>,
}

/// Follows a desired pose trajectory at [`LOOP_RATE_HZ`]. Desired joint
/// angles are held between samples; one log row per input sample.
pub fn track_pose_trajectory(
    params: &MechanismParams,
    ctl: &Controller,
    poses: &[(f64, Pose)],
) -> Result<Vec<TrackSample>, ControlError> {
    ctl.gains.validate()?;
    if poses.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(i) = poses.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(ControlError::NonMonotoneTime { index: i + 1 });
    }
    let mut targets = Vec::with_capacity(poses.len());
    let mut hint: Option<JointAngles> = None;
    for &(t, pose) in poses {
        let q = inverse_kinematics(params, &pose, hint.as_ref())
            .into_joints()
            .map_err(|source| ControlError::Infeasible { t, source })?;
        hint = Some(q);
        targets.push(q);
    }

    let dt = 1.0 / LOOP_RATE_HZ;
    let t0 = poses[0].0;
    let mut motors = ctl.motors_at(&targets[0]);
    let mut q_prev = ctl.leg_angles(&motors);
    let mut pose_prev = poses[0].1;
    let mut torques = Vector4::zeros();
    let mut ticks: u64 = 0;
    let mut log = Vec::with_capacity(poses.len());
    for (k, &(t, desired)) in poses.iter().enumerate() {
        // Run the loop up to this sample on the previous target.
        let hold = if k == 0 { targets[0] } else { targets[k - 1] };
        while t0 + (ticks + 1) as f64 * dt <= t + 1e-12 {
            let (m, tau) = step_control(params, ctl, &motors, &hold, &Wrench::ZERO, None, dt)?;
            motors = m;
            torques = tau;
            ticks += 1;
        }
        let q_now = ctl.leg_angles(&motors);
        let actual = estimate_pose(params, &q_prev, &q_now, &pose_prev)?;
        log.push(TrackSample {
            t,
            desired,
            actual,
            q: q_now,
            torques,
        });
        q_prev = q_now;
        pose_prev = actual;
    }
    Ok(log)
}

fn estimate_pose(
    params: &MechanismParams,
    q_prev: &JointAngles,
    q_now: &JointAngles,
    pose_prev: &Pose,
) -> Result<Pose, KinematicsError> {
    match forward_kinematics_iterative(params, q_prev, q_now, pose_prev, 1.0) {
        Ok(r) => Ok(r.pose),
        Err(_) => Ok(forward_kinematics_direct(params, q_now, Some(pose_prev.theta))?.pose),
    }
}

/// `t_s,x_des,y_des,z_des,th_des,x_act,y_act,z_act,th_act,q1..q4,tau1..tau4`
/// in mm, degrees and N·mm.
pub fn track_log_csv(log: &[TrackSample]) -> String {
    let mut out =
        String::from("t_s,x_des,y_des,z_des,th_des,x_act,y_act,z_act,th_act,q1,q2,q3,q4,tau1,tau2,tau3,tau4\n");
    for s in log {
        let d = &s.desired;
        let a = &s.actual;
        let mut row = vec![
            format!("{:.6}", s.t),
            format!("{:.6}", d.x),
            format!("{:.6}", d.y),
            format!("{:.6}", d.z),
            format!("{:.6}", d.theta.to_degrees()),
            format!("{:.6}", a.x),
            format!("{:.6}", a.y),
            format!("{:.6}", a.z),
            format!("{:.6}", a.theta.to_degrees()),
        ];
        row.extend(s.q.q.iter().map(|q| format!("{:.6}", q.to_degrees())));
        row.extend(s.torques.iter().map(|t| format!("{:.6}", t)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ik::home_pose;

    fn home() -> (MechanismParams, JointAngles) {
        let p = MechanismParams::default();
        let q = inverse_kinematics(&p, &home_pose(&p), None).into_joints().unwrap();
        (p, q)
    }

    #[test]
    fn zero_error_zero_torque() {
        let (p, q) = home();
        let ctl = Controller::default();
        let motors = ctl.motors_at(&q);
        let (_, tau) = step_control(&p, &ctl, &motors, &q, &Wrench::ZERO, None, 1.0 / LOOP_RATE_HZ).unwrap();
        assert_eq!(tau, Vector4::zeros());
    }

    #[test]
    fn saturation_is_exact() {
        let (p, q) = home();
        let mut ctl = Controller::default();
        ctl.gains.kp = 1e6;
        let motors = ctl.motors_at(&q);
        let mut far = q;
        far.q[0] += 0.5;
        far.q[1] -= 0.5;
        let (_, tau) = step_control(&p, &ctl, &motors, &far, &Wrench::ZERO, None, 1.0 / LOOP_RATE_HZ).unwrap();
        assert_eq!(tau[0], p.tau_max);
        assert_eq!(tau[1], -p.tau_max);
    }

    #[test]
    fn feedforward_matches_statics() {
        let (p, q) = home();
        let ctl = Controller {
            gains: PidGains {
                kp: 0.0,
                ki: 0.0,
                kd: 0.0,
            },
            ..Controller::default()
        };
        let pose = home_pose(&p);
        let w = Wrench::new(0.0, 0.0, 1.0, 0.0);
        let (_, tau) = step_control(
            &p,
            &ctl,
            &ctl.motors_at(&q),
            &q,
            &w,
            Some((&pose, &q)),
            1.0 / LOOP_RATE_HZ,
        )
        .unwrap();
        let expect = crate::statics::joint_torques_for_wrench(&p, &pose, &q, &w).unwrap();
        assert!((tau - expect).amax() < 1e-12);
        assert!(step_control(&p, &ctl, &ctl.motors_at(&q), &q, &w, None, 0.001).is_err());
    }

    #[test]
    fn default_gains_are_critically_damped() {
        let plant = MotorPlant::default();
        let g = PidGains::default();
        let b = plant.damping;
        // Discriminant of b s² + kp s + ki vanishes.
        assert!((g.kp * g.kp - 4.0 * b * g.ki).abs() < 1e-9 * g.kp * g.kp);
        let w = (g.ki / b).sqrt();
        assert!((w - std::f64::consts::TAU * 20.0).abs() < 1e-9);
    }

    #[test]
    fn pose_trajectory_parsing() {
        let text = "t_s,x_mm,y_mm,z_mm,theta_deg\n0,0,0,10,0\n0.5,1,2,11,90\n";
        let poses = read_pose_trajectory(text.as_bytes()).unwrap();
        assert_eq!(poses.len(), 2);
        assert!((poses[1].1.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(read_pose_trajectory("t,x\n0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn transmission_roundtrip() {
        let t = Transmission {
            ratio: 0.5,
            offset: 0.1,
        };
        assert!((t.motor_angle(t.leg_angle(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_and_unordered_trajectories() {
        let p = MechanismParams::default();
        let ctl = Controller::default();
        assert!(track_pose_trajectory(&p, &ctl, &[]).unwrap().is_empty());
        let h = home_pose(&p);
        assert!(matches!(
            track_pose_trajectory(&p, &ctl, &[(1.0, h), (0.5, h)]),
            Err(ControlError::NonMonotoneTime { index: 1 })
        ));
        let far = Pose::new(0.0, 0.0, 500.0, 0.0);
        assert!(matches!(
            track_pose_trajectory(&p, &ctl, &[(0.0, h), (0.1, far)]),
            Err(ControlError::Infeasible { t, .. }) if t == 0.1
        ));
    }
}
