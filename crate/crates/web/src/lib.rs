//! wasm-bindgen bindings for the browser demo. Every export returns a JSON
//! string; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use tactor::geometry::{base_point, db_vector, upper_link_vector};
use tactor::ik::is_reachable;
use tactor::render::{read_trajectory, render_trajectory, Scene, DEFAULT_K_THETA};
use tactor::{forward_kinematics_direct, home_pose, inverse_kinematics, JointAngles, Leg, MechanismParams, Pose};
use wasm_bindgen::prelude::*;

const DEMOS: [(&str, &str); 2] = [
    (
        include_str!("../../../fixtures/demo1_scene.json"),
        include_str!("../../../fixtures/demo1_trajectory.csv"),
    ),
    (
        include_str!("../../../fixtures/demo2_scene.json"),
        include_str!("../../../fixtures/demo2_trajectory.csv"),
    ),
];

fn finish(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Line segments of each leg: actuated joint, elbow, plate joint.
fn legs(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> Value {
    let p = pose.position();
    Leg::ALL
        .iter()
        .map(|&leg| {
            let base = base_point(params, leg);
            let elbow = base + upper_link_vector(params, leg, q.q[leg.index()]);
            let joint = p + db_vector(params, leg, pose.theta);
            json!([
                [base.x, base.y, base.z],
                [elbow.x, elbow.y, elbow.z],
                [joint.x, joint.y, joint.z]
            ])
        })
        .collect()
}

fn ik_value(x: f64, y: f64, z: f64, theta_deg: f64) -> Result<Value, String> {
    let params = MechanismParams::default();
    let pose = Pose::new(x, y, z, theta_deg.to_radians());
    let sol = inverse_kinematics(&params, &pose, None);
    let q = sol.into_joints().map_err(|e| e.to_string())?;
    Ok(json!({
        "q_deg": q.q.map(f64::to_degrees),
        "legs": legs(&params, &pose, &q),
    }))
}

fn fk_value(q_deg: [f64; 4]) -> Result<Value, String> {
    let params = MechanismParams::default();
    let q = JointAngles::new(q_deg.map(f64::to_radians));
    let fk = forward_kinematics_direct(&params, &q, None).map_err(|e| e.to_string())?;
    let p = fk.pose;
    Ok(json!({
        "pose": [p.x, p.y, p.z, p.theta.to_degrees()],
        "legs": legs(&params, &p, &q),
    }))
}

/// Reachability and total twist range on a horizontal slice at height `z`.
fn slice_value(z: f64, resolution: f64) -> Result<Value, String> {
    if !(resolution >= 0.1 && resolution.is_finite()) {
        return Err("resolution must be at least 0.1 mm".into());
    }
    let params = MechanismParams::default();
    let step_deg = 2.0;
    let step = f64::to_radians(step_deg);
    let half = 16.0;
    let n = (2.0 * half / resolution).round() as usize + 1;
    let twist = |x: f64, y: f64, sign: f64| {
        let mut k = 0;
        while (k + 1) as f64 * step <= params.theta_limit + 1e-12
            && is_reachable(&params, &Pose::new(x, y, z, sign * (k + 1) as f64 * step))
        {
            k += 1;
        }
        k as f64 * step_deg
    };
    let mut rows = Vec::with_capacity(n);
    for iy in 0..n {
        let y = -half + iy as f64 * resolution;
        let row: Vec<f64> = (0..n)
            .map(|ix| {
                let x = -half + ix as f64 * resolution;
                if is_reachable(&params, &Pose::new(x, y, z, 0.0)) {
                    twist(x, y, 1.0) + twist(x, y, -1.0)
                } else {
                    -1.0
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(json!({ "origin": [-half, -half], "resolution": resolution, "total_twist_deg": rows }))
}

fn demo_value(which: usize, k_theta_nmm_per_deg: f64) -> Result<Value, String> {
    let (scene, traj) = DEMOS.get(which).ok_or("demo index must be 0 or 1")?;
    let scene = Scene::from_json_str(scene).map_err(|e| e.to_string())?;
    let traj = read_trajectory(traj.as_bytes()).map_err(|e| e.to_string())?;
    let k = if k_theta_nmm_per_deg > 0.0 {
        k_theta_nmm_per_deg.to_degrees()
    } else {
        DEFAULT_K_THETA
    };
    let steps = render_trajectory(&scene, &traj, k).map_err(|e| e.to_string())?;
    let col = |f: &dyn Fn(&tactor::Wrench) -> f64| steps.iter().map(|s| f(&s.wrench)).collect::<Vec<_>>();
    Ok(json!({
        "t": steps.iter().map(|s| s.t).collect::<Vec<_>>(),
        "fx": col(&|w| w.fx),
        "fy": col(&|w| w.fy),
        "fz": col(&|w| w.fz),
        "tz": col(&|w| w.tz),
    }))
}

#[wasm_bindgen]
pub fn home_z() -> f64 {
    home_pose(&MechanismParams::default()).z
}

/// Joint angles (deg) and leg segments for a pose in mm and degrees.
#[wasm_bindgen]
pub fn solve_ik(x: f64, y: f64, z: f64, theta_deg: f64) -> String {
    finish(ik_value(x, y, z, theta_deg))
}

/// Pose `[x, y, z, theta_deg]` and leg segments for joint angles in degrees.
#[wasm_bindgen]
pub fn solve_fk(q1: f64, q2: f64, q3: f64, q4: f64) -> String {
    finish(fk_value([q1, q2, q3, q4]))
}

/// Horizontal workspace slice; unreachable cells are `-1`.
#[wasm_bindgen]
pub fn workspace_slice(z: f64, resolution: f64) -> String {
    finish(slice_value(z, resolution))
}

/// Wrench trace of a bundled demo (0: press-slide-twist, 1: pick and
/// release). `k_theta` in N·mm/deg; non-positive selects the default.
#[wasm_bindgen]
pub fn render_demo(which: usize, k_theta: f64) -> String {
    finish(demo_value(which, k_theta))
}
