//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible query.
//! Angles are degrees on the command line and in every file.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::control::{read_pose_trajectory, track_log_csv, track_pose_trajectory, Controller, PidGains};
use crate::fk::forward_kinematics_direct;
use crate::ik::{home_pose, inverse_kinematics, IkIssue};
use crate::params::MechanismParams;
use crate::render::{self, read_trajectory, render_trajectory, trace_csv, Scene};
use crate::statics::{capacity_csv, capacity_report};
use crate::types::{JointAngles, Pose};
use crate::workspace::{summarize, sweep_workspace};
use crate::KinematicsError;

#[derive(Debug, Parser)]
#[command(
    name = "tactor",
    version,
    about = "Kinematics, workspace, statics, rendering and control for a 4-DoF fingertip parallel mechanism"
)]
struct Cli {
    /// Mechanism JSON (lengths in mm, angles in degrees). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    mechanism: Option<PathBuf>,
    /// Print a machine-readable JSON summary on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inverse kinematics of one pose. Prints joint angles in degrees.
    Ik {
        /// Pose as x,y,z,theta: mm, mm, mm, degrees.
        #[arg(long, value_name = "X,Y,Z,THETA", allow_hyphen_values = true)]
        pose: String,
    },
    /// Direct forward kinematics of one joint configuration.
    Fk {
        /// Joint angles q1,q2,q3,q4 in degrees.
        #[arg(long, value_name = "Q1,Q2,Q3,Q4", allow_hyphen_values = true)]
        q: String,
        /// Preferred twist in degrees when several assemblies exist.
        #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
        theta_hint: Option<f64>,
    },
    /// Reachable and dexterous workspace sweep.
    Workspace {
        /// Grid spacing in mm.
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        /// Twist scan step in degrees.
        #[arg(long, default_value_t = 1.0)]
        rotation_step_deg: f64,
        /// Total twist range (degrees) required inside the dexterous box.
        #[arg(long, default_value_t = 60.0)]
        rotation_min_deg: f64,
        /// Grid CSV output (x_mm,y_mm,z_mm,reachable,rot_pos_deg,rot_neg_deg).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Force (N) and torque (N·mm) capacity along the eight signed axes.
    Wrench {
        /// Pose as x,y,z,theta: mm, mm, mm, degrees. Home pose when omitted.
        #[arg(long, value_name = "X,Y,Z,THETA", allow_hyphen_values = true)]
        pose: Option<String>,
        /// Capacity CSV output (direction,capacity).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Render a finger trajectory against a scene into a wrench trace.
    Render(RenderArgs),
    /// Track a desired pose trajectory with the simulated 1900 Hz PID loop.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Scene JSON (mm, stiffness in N/m, dimensionless friction).
    #[arg(long, value_name = "FILE")]
    scene: PathBuf,
    /// Finger trajectory CSV t_s,x_mm,y_mm,z_mm,twist_deg.
    #[arg(long, value_name = "FILE")]
    trajectory: PathBuf,
    /// Torsional stiffness in N·mm per degree.
    #[arg(long, default_value_t = 0.5)]
    k_theta: f64,
    /// Trace CSV output t_s,fx_N,fy_N,fz_N,tz_Nmm. Standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Desired pose trajectory CSV t_s,x_mm,y_mm,z_mm,theta_deg.
    #[arg(long, value_name = "FILE")]
    trajectory: PathBuf,
    /// Gains JSON {"kp": N·mm/rad, "ki": N·mm/(rad·s), "kd": N·mm·s/rad}.
    #[arg(long, value_name = "FILE")]
    gains: Option<PathBuf>,
    /// Log CSV output (mm, degrees, N·mm). Standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
    stdout: Option<Value>,
}

impl Failure {
    fn usage(message: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
            stdout: None,
        }
    }

    fn infeasible(message: impl std::fmt::Display, stdout: Value) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
            stdout: Some(stdout),
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(f) => {
            if let Some(v) = f.stdout {
                println!("{}", pretty(&v));
            }
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn load_params(path: Option<&Path>) -> Result<MechanismParams, Failure> {
    match path {
        None => Ok(MechanismParams::default()),
        Some(p) => MechanismParams::from_json_file(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
    }
}

fn parse_list<const N: usize>(text: &str, what: &str) -> Result<[f64; N], Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::usage(format!("{what}: {e}")))?;
    let arr: [f64; N] = values.try_into().map_err(|v: Vec<f64>| {
        Failure::usage(format!("{what}: expected {N} comma-separated numbers, got {}", v.len()))
    })?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Failure::usage(format!("{what}: values must be finite")));
    }
    Ok(arr)
}

fn parse_pose(text: &str) -> Result<Pose, Failure> {
    let [x, y, z, th] = parse_list::<4>(text, "--pose")?;
    Ok(Pose::new(x, y, z, th.to_radians()))
}

/// Writes `contents` after every input has been validated.
fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn pose_json(p: &Pose) -> Value {
    json!({ "x_mm": p.x, "y_mm": p.y, "z_mm": p.z, "theta_deg": p.theta.to_degrees() })
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let params = load_params(cli.mechanism.as_deref())?;
    match &cli.command {
        Command::Ik { pose } => cmd_ik(&params, &parse_pose(pose)?),
        Command::Fk { q, theta_hint } => {
            let q = parse_list::<4>(q, "--q")?.map(f64::to_radians);
            cmd_fk(&params, &JointAngles::new(q), theta_hint.map(f64::to_radians))
        }
        Command::Workspace {
            resolution,
            rotation_step_deg,
            rotation_min_deg,
            out,
        } => cmd_workspace(
            &params,
            cli.mechanism.is_none(),
            *resolution,
            *rotation_step_deg,
            *rotation_min_deg,
            out.as_deref(),
        ),
        Command::Wrench { pose, out } => {
            let pose = match pose {
                Some(p) => parse_pose(p)?,
                None => home_pose(&params),
            };
            cmd_wrench(&params, &pose, out.as_deref(), cli.json)
        }
        Command::Render(args) => cmd_render(args, cli.json),
        Command::Simulate(args) => cmd_simulate(&params, args, cli.json),
    }
}

fn cmd_ik(params: &MechanismParams, pose: &Pose) -> Result<String, Failure> {
    let sol = inverse_kinematics(params, pose, None);
    let issue = sol.issue.map(|i| match i {
        IkIssue::Unreachable { leg } => format!("leg {} cannot reach", leg.number()),
        IkIssue::JointLimit { leg, angle } => {
            format!(
                "leg {} root {:.4} deg violates joint limits",
                leg.number(),
                angle.to_degrees()
            )
        }
        IkIssue::Singular { leg } => format!("leg {} has no finite root", leg.number()),
    });
    let out = json!({
        "q_deg": sol.joints.q.map(f64::to_degrees),
        "feasible": sol.feasible,
        "discriminants": sol.discriminants,
        "issue": issue,
    });
    if sol.feasible {
        Ok(pretty(&out) + "\n")
    } else {
        Err(Failure::infeasible(issue.unwrap_or_default(), out))
    }
}

fn cmd_fk(params: &MechanismParams, q: &JointAngles, hint: Option<f64>) -> Result<String, Failure> {
    if let Some(i) = q.q.iter().position(|&qi| !params.within_q_limits(qi)) {
        let msg = format!(
            "q{} = {:.4} deg is outside the joint limits",
            i + 1,
            q.q[i].to_degrees()
        );
        return Err(Failure::infeasible(&msg, json!({ "feasible": false, "error": msg })));
    }
    match forward_kinematics_direct(params, q, hint) {
        Ok(r) => {
            let mut v = pose_json(&r.pose);
            v["residual_norm"] = json!(r.residual_norm);
            v["method"] = json!(r.method);
            v["feasible"] = json!(true);
            Ok(pretty(&v) + "\n")
        }
        Err(e @ (KinematicsError::NoRealRoot | KinematicsError::NoConvergence { .. })) => Err(Failure::infeasible(
            &e,
            json!({ "feasible": false, "error": e.to_string() }),
        )),
        Err(e) => Err(Failure::usage(e)),
    }
}

fn cmd_workspace(
    params: &MechanismParams,
    defaults: bool,
    resolution: f64,
    rotation_step_deg: f64,
    rotation_min_deg: f64,
    out: Option<&Path>,
) -> Result<String, Failure> {
    if !rotation_min_deg.is_finite() {
        return Err(Failure::usage("--rotation-min-deg must be finite"));
    }
    let grid = sweep_workspace(params, resolution, rotation_step_deg.to_radians()).map_err(Failure::usage)?;
    let summary = summarize(&grid, rotation_min_deg.to_radians());
    let mut v = serde_json::to_value(&summary).expect("summary serializes");
    if defaults {
        v["reference"] = json!({
            "extents_mm_text": [13.0, 12.0, 9.0],
            "extents_mm_figure": [24.0, 26.0, 18.0],
            "theta_range_deg": 30.0,
            "dexterous_edges_mm": [8.0, 10.0, 8.0],
            "dexterous_volume_cm3": 0.64,
        });
    }
    if let Some(path) = out {
        write_file(path, &grid.to_csv())?;
    }
    Ok(pretty(&v) + "\n")
}

fn cmd_wrench(params: &MechanismParams, pose: &Pose, out: Option<&Path>, as_json: bool) -> Result<String, Failure> {
    let report = match capacity_report(params, pose) {
        Ok(r) => r,
        Err(e @ (KinematicsError::Infeasible { .. } | KinematicsError::JointLimit { .. })) => {
            return Err(Failure::infeasible(
                &e,
                json!({ "feasible": false, "error": e.to_string() }),
            ))
        }
        Err(e) => return Err(Failure::infeasible(&e, json!({ "error": e.to_string() }))),
    };
    let csv = capacity_csv(&report);
    if let Some(path) = out {
        write_file(path, &csv)?;
    }
    if as_json {
        let v = json!({
            "pose": pose_json(pose),
            "tau_max_nmm": params.tau_max,
            "capacity": report,
        });
        Ok(pretty(&v) + "\n")
    } else {
        Ok(csv)
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn cmd_render(args: &RenderArgs, as_json: bool) -> Result<String, Failure> {
    let scene =
        Scene::from_json_file(&args.scene).map_err(|e| Failure::usage(format!("{}: {e}", args.scene.display())))?;
    let traj = read_trajectory(open(&args.trajectory)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.trajectory.display())))?;
    if !(args.k_theta >= 0.0 && args.k_theta.is_finite()) {
        return Err(Failure::usage("--k-theta must be finite and non-negative"));
    }
    let k_theta = args.k_theta * 180.0 / std::f64::consts::PI;
    let steps = render_trajectory(&scene, &traj, k_theta).map_err(Failure::usage)?;
    let trace = trace_csv(&steps);
    if let Some(path) = &args.out {
        write_file(path, &trace)?;
    }
    let t_end = steps.last().map(|s| s.t).unwrap_or(0.0);
    let peak = |f: &dyn Fn(&crate::types::Wrench) -> f64| steps.iter().map(|s| f(&s.wrench).abs()).fold(0.0, f64::max);
    let summary = json!({
        "samples": steps.len(),
        "duration_s": t_end - steps.first().map(|s| s.t).unwrap_or(0.0),
        "contact_samples": steps.iter().filter(|s| s.contacts.iter().any(|c| c.in_contact)).count(),
        "peak_shear_n": peak(&|w| w.fx.hypot(w.fy)),
        "peak_normal_n": peak(&|w| w.fz),
        "peak_torque_nmm": peak(&|w| w.tz),
        "min_proxy_distance_mm": Some(steps.iter().map(|s| s.min_proxy_distance).fold(f64::INFINITY, f64::min))
            .filter(|d| d.is_finite()),
        "max_cone_excess_n": steps.iter().map(|s| s.cone_excess).fold(0.0, f64::max),
        "limits": { "shear_n": render::MAX_SHEAR, "normal_n": render::MAX_NORMAL, "torque_nmm": render::MAX_TORQUE },
    });
    match (as_json, &args.out) {
        (true, _) => Ok(pretty(&summary) + "\n"),
        (false, Some(_)) => Ok(String::new()),
        (false, None) => Ok(trace),
    }
}

fn cmd_simulate(params: &MechanismParams, args: &SimulateArgs, as_json: bool) -> Result<String, Failure> {
    let poses = read_pose_trajectory(open(&args.trajectory)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.trajectory.display())))?;
    let mut ctl = Controller::default();
    if let Some(path) = &args.gains {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let gains: PidGains =
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        gains.validate().map_err(Failure::usage)?;
        ctl.gains = gains;
    }
    let log = track_pose_trajectory(params, &ctl, &poses).map_err(|e| match e {
        crate::control::ControlError::Infeasible { .. } => Failure::infeasible(&e, json!({ "error": e.to_string() })),
        other => Failure::usage(other),
    })?;
    let csv = track_log_csv(&log);
    if let Some(path) = &args.out {
        write_file(path, &csv)?;
    }
    let summary = json!({
        "samples": log.len(),
        "loop_rate_hz": crate::control::LOOP_RATE_HZ,
        "gains": ctl.gains,
        "max_position_error_mm": log.iter().map(|s| s.actual.translation_distance(&s.desired)).fold(0.0, f64::max),
        "max_twist_error_deg": log.iter().map(|s| s.actual.rotation_distance(&s.desired).to_degrees()).fold(0.0, f64::max),
        "max_abs_torque_nmm": log.iter().map(|s| s.torques.amax()).fold(0.0, f64::max),
        "tau_max_nmm": params.tau_max,
    });
    match (as_json, &args.out) {
        (true, _) => Ok(pretty(&summary) + "\n"),
        (false, Some(_)) => Ok(String::new()),
        (false, None) => Ok(csv),
    }
}
