//! Forward kinematics.
//!
//! Two independent routes:
//!
//! * **Iterative**: integrate the Jacobian over one joint-space step from a
//!   known pose, then polish with Newton iterations on the closure residuals.
//! * **Direct**: subtract leg 1's closure from legs 2..4. The three
//!   differences are linear in `(x, y, z)` for a fixed twist and are solved by
//!   Cramer's rule; substituting back into leg 1 leaves a scalar equation in
//!   `theta` that is bracketed on a uniform grid and refined by bisection.
//!
//! The direct route clears the Cramer denominator before root-finding, so the
//! scalar function has no poles and its zero set is that of the degree-8
//! half-angle polynomial.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::geometry::{base_point, constraint_residual, db_vector, upper_link_vector};
use crate::ik::inverse_kinematics;
use crate::jacobian::{jacobian, normalized_determinant, pose_partials};
use crate::params::{Leg, MechanismParams};
use crate::types::{wrap_angle, JointAngles, Pose};

/// Closure residual norm accepted as converged, mm².
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Twist grid used to bracket roots: 721 points spanning `[-pi, pi]`.
pub const THETA_GRID_POINTS: usize = 721;
pub const BISECTION_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FkMethod {
    Iterative,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkResult {
    pub pose: Pose,
    /// Euclidean norm of the four closure residuals, mm².
    pub residual_norm: f64,
    pub method: FkMethod,
}

/// Newton iterations on the closure residuals with the joints held fixed.
/// Returns the polished pose and its residual norm.
pub fn refine_pose(params: &MechanismParams, q: &JointAngles, start: Pose) -> Result<(Pose, f64), KinematicsError> {
    let mut pose = start;
    let mut residual = constraint_residual(params, &pose, q);
    let mut norm = residual.norm();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if norm < RESIDUAL_TOLERANCE {
            // One extra step is nearly free and buys several digits.
            if let Some(next) = newton_step(params, q, &pose, &residual) {
                let next_res = constraint_residual(params, &next, q);
                if next_res.norm() <= norm {
                    return Ok((next, next_res.norm()));
                }
            }
            return Ok((pose, norm));
        }
        let Some(next) = newton_step(params, q, &pose, &residual) else {
            break;
        };
        pose = next;
        residual = constraint_residual(params, &pose, q);
        norm = residual.norm();
        if !norm.is_finite() {
            break;
        }
    }
    if norm < RESIDUAL_TOLERANCE {
        return Ok((pose, norm));
    }
    Err(KinematicsError::NoConvergence {
        residual: norm,
        iterations: MAX_NEWTON_ITERATIONS,
    })
}

fn newton_step(params: &MechanismParams, q: &JointAngles, pose: &Pose, residual: &Vector4<f64>) -> Option<Pose> {
    let a = pose_partials(params, pose, q);
    let delta = a.lu().solve(residual)?;
    if !delta.iter().all(|d| d.is_finite()) {
        return None;
    }
    Some(Pose::from_vector(&(pose.to_vector() - delta)))
}

/// First-order prediction `p + J (q_now - q_prev)` before any refinement.
pub fn predict_pose(
    params: &MechanismParams,
    q_prev: &JointAngles,
    q_now: &JointAngles,
    pose_prev: &Pose,
) -> Result<Pose, KinematicsError> {
    let j = jacobian(params, pose_prev, q_prev)?;
    let dq = q_now.to_vector() - q_prev.to_vector();
    Ok(Pose::from_vector(&(pose_prev.to_vector() + j * dq)))
}

/// One step of the Jacobian-integration update followed by Newton refinement.
///
/// `dt` only scales the joint velocity `(q_now - q_prev) / dt`, which the
/// update multiplies straight back by `dt`; it is validated but does not
/// otherwise change the result.
pub fn forward_kinematics_iterative(
    params: &MechanismParams,
    q_prev: &JointAngles,
    q_now: &JointAngles,
    pose_prev: &Pose,
    dt: f64,
) -> Result<FkResult, KinematicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KinematicsError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let j = jacobian(params, pose_prev, q_prev)?;
    let q_dot = (q_now.to_vector() - q_prev.to_vector()) / dt;
    let estimate = Pose::from_vector(&(pose_prev.to_vector() + j * q_dot * dt));
    let (pose, residual_norm) = refine_pose(params, q_now, estimate)?;
    Ok(FkResult {
        pose: pose.normalized(),
        residual_norm,
        method: FkMethod::Iterative,
    })
}

/// Per-leg constant part of the closure vector: `DB_i(theta) - P_i - P_iA_i(q_i)`.
fn leg_offsets(params: &MechanismParams, q: &JointAngles, theta: f64) -> [Vector3<f64>; 4] {
    Leg::ALL.map(|leg| {
        db_vector(params, leg, theta) - base_point(params, leg) - upper_link_vector(params, leg, q.q[leg.index()])
    })
}

/// How the linear position system is posed for a given set of joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Elimination {
    /// Legs at distinct heights: the 3x3 system fixes `(x, y, z)`.
    Cramer,
    /// All elbows at one height: the differences carry no `z` information,
    /// so `(x, y)` come from the diagonal differences and `z` from leg 1.
    Planar,
}

/// Height spread of the elbows below which the planar elimination is used, mm.
const PLANAR_SPREAD: f64 = 1e-6;

struct TwistFunction<'a> {
    params: &'a MechanismParams,
    q: &'a JointAngles,
    mode: Elimination,
}

impl<'a> TwistFunction<'a> {
    fn new(params: &'a MechanismParams, q: &'a JointAngles) -> Self {
        // The z components of the offsets do not depend on theta.
        let c = leg_offsets(params, q, 0.0);
        let spread = c.iter().map(|ci| (ci.z - c[0].z).abs()).fold(0.0, f64::max);
        let mode = if spread > PLANAR_SPREAD {
            Elimination::Cramer
        } else {
            Elimination::Planar
        };
        Self { params, q, mode }
    }

    /// Scalar function whose zeros are the consistent twists, and the
    /// position it implies. `None` where the linear system is degenerate.
    fn evaluate(&self, theta: f64) -> Option<(f64, Vector3<f64>)> {
        let c = leg_offsets(self.params, self.q, theta);
        let l2 = self.params.lower_link * self.params.lower_link;
        match self.mode {
            Elimination::Cramer => {
                // Rows: 2 (c_k - c_1) . p = |c_1|^2 - |c_k|^2, k = 2, 3, 4.
                let m = Matrix3::from_rows(&[
                    (2.0 * (c[1] - c[0])).transpose(),
                    (2.0 * (c[2] - c[0])).transpose(),
                    (2.0 * (c[3] - c[0])).transpose(),
                ]);
                let v = Vector3::new(
                    c[0].norm_squared() - c[1].norm_squared(),
                    c[0].norm_squared() - c[2].norm_squared(),
                    c[0].norm_squared() - c[3].norm_squared(),
                );
                let det = m.determinant();
                let numerators = cramer_numerators(&m, &v);
                // (p + c_1) * det, without dividing.
                let n = numerators + det * c[0];
                let g = n.norm_squared() - det * det * l2;
                if det == 0.0 || !g.is_finite() {
                    return None;
                }
                Some((g, numerators / det))
            }
            Elimination::Planar => {
                // r_1 - r_3 and r_2 - r_4 restricted to (x, y).
                let d13 = c[0] - c[2];
                let d24 = c[1] - c[3];
                let m = Matrix2::new(2.0 * d13.x, 2.0 * d13.y, 2.0 * d24.x, 2.0 * d24.y);
                let rhs = Vector2::new(
                    c[2].norm_squared() - c[0].norm_squared(),
                    c[3].norm_squared() - c[1].norm_squared(),
                );
                let xy = m.lu().solve(&rhs)?;
                let horizontal = Vector2::new(xy.x + c[0].x, xy.y + c[0].y).norm_squared();
                let vertical2 = l2 - horizontal;
                if vertical2 < 0.0 {
                    return None;
                }
                // Plate above the elbows.
                let z = -c[0].z + vertical2.sqrt();
                let p = Vector3::new(xy.x, xy.y, z);
                let r = |k: usize| (p + c[k]).norm_squared() - l2;
                let g = r(0) - r(1) + r(2) - r(3);
                g.is_finite().then_some((g, p))
            }
        }
    }
}

fn cramer_numerators(m: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for col in 0..3 {
        let mut mc = *m;
        mc.set_column(col, v);
        out[col] = mc.determinant();
    }
    out
}

/// The pose reproduces `q` through the default inverse branch.
fn ik_consistent(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> bool {
    let sol = inverse_kinematics(params, pose, None);
    sol.feasible && sol.joints.max_abs_diff(q) < 1e-6
}

/// Every consistent pose for the given joints, polished to the residual
/// tolerance, sorted by twist.
pub fn all_direct_solutions(params: &MechanismParams, q: &JointAngles) -> Result<Vec<Pose>, KinematicsError> {
    if q.q.iter().any(|x| !x.is_finite()) {
        return Err(KinematicsError::InvalidArgument("joint angles must be finite".into()));
    }
    let f = TwistFunction::new(params, q);
    let step = 2.0 * PI / (THETA_GRID_POINTS - 1) as f64;
    let samples: Vec<(f64, Option<(f64, Vector3<f64>)>)> = (0..THETA_GRID_POINTS)
        .map(|k| {
            let theta = -PI + k as f64 * step;
            (theta, f.evaluate(theta))
        })
        .collect();
    if samples.iter().all(|(_, s)| s.is_none()) {
        return Err(KinematicsError::DegenerateLinearSystem);
    }

    let mut roots: Vec<f64> = Vec::new();
    for pair in samples.windows(2) {
        let (t0, Some((g0, _))) = pair[0] else { continue };
        let (t1, Some((g1, _))) = pair[1] else { continue };
        if g0 == 0.0 {
            roots.push(t0);
        } else if g0.signum() != g1.signum() && g1 != 0.0 {
            if let Some(root) = bisect(&f, t0, t1, g0) {
                roots.push(root);
            }
        }
    }
    if let Some((t, Some((g, _)))) = samples.last() {
        if *g == 0.0 {
            roots.push(*t);
        }
    }
    // Where the linear system is badly conditioned the twist function can
    // dip through zero and back inside one grid cell. Minimize toward zero
    // around every same-sign local minimum of |G| and split the bracket if
    // the minimum crosses.
    for triple in samples.windows(3) {
        let (Some((g0, _)), Some((g1, _)), Some((g2, _))) = (triple[0].1, triple[1].1, triple[2].1) else {
            continue;
        };
        let sign = g1.signum();
        if g1 == 0.0 || g0.signum() != sign || g2.signum() != sign || g1.abs() > g0.abs() || g1.abs() > g2.abs() {
            continue;
        }
        let (lo, hi) = (triple[0].0, triple[2].0);
        let Some((t_min, g_min)) = golden_minimum(&f, lo, hi, sign) else {
            continue;
        };
        if g_min.signum() == sign && g_min != 0.0 {
            // Near-tangency: let the Newton polish decide.
            roots.push(t_min);
            continue;
        }
        if let Some(r) = bisect(&f, lo, t_min, g0) {
            roots.push(r);
        }
        if let Some(r) = bisect(&f, t_min, hi, g_min) {
            roots.push(r);
        }
    }

    let mut poses: Vec<Pose> = Vec::new();
    for theta in roots {
        let Some((_, p)) = f.evaluate(theta) else { continue };
        let start = Pose::new(p.x, p.y, p.z, theta);
        let Ok((pose, _)) = refine_pose(params, q, start) else {
            continue;
        };
        let pose = pose.normalized();
        if !pose.is_finite() {
            continue;
        }
        let dup = poses
            .iter()
            .any(|other| other.translation_distance(&pose) < 1e-7 && other.rotation_distance(&pose) < 1e-9);
        if !dup {
            poses.push(pose);
        }
    }
    poses.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(poses)
}

/// Golden-section minimum of `sign * G` on `[lo, hi]`; returns the twist and
/// the unscaled `G` there.
fn golden_minimum(f: &TwistFunction<'_>, mut lo: f64, mut hi: f64, sign: f64) -> Option<(f64, f64)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let value = |t: f64| f.evaluate(t).map(|(g, _)| g);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut ga = value(a)?;
    let mut gb = value(b)?;
    for _ in 0..BISECTION_ITERATIONS {
        if ga.signum() != sign || gb.signum() != sign {
            break;
        }
        if sign * ga < sign * gb {
            hi = b;
            b = a;
            gb = ga;
            a = hi - ratio * (hi - lo);
            ga = value(a)?;
        } else {
            lo = a;
            a = b;
            ga = gb;
            b = lo + ratio * (hi - lo);
            gb = value(b)?;
        }
    }
    Some(if sign * ga < sign * gb { (a, ga) } else { (b, gb) })
}

fn bisect(f: &TwistFunction<'_>, mut lo: f64, mut hi: f64, g_lo: f64) -> Option<f64> {
    let mut s_lo = g_lo.signum();
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let (g_mid, _) = f.evaluate(mid)?;
        if g_mid == 0.0 {
            return Some(mid);
        }
        if g_mid.signum() == s_lo {
            lo = mid;
            s_lo = g_mid.signum();
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Direct forward kinematics.
///
/// Only poses within the plate stop count. Those that the default inverse
/// branch maps back to `q` are preferred; among them the twist nearest
/// `theta_hint` wins, or the highest plate when no hint is given.
pub fn forward_kinematics_direct(
    params: &MechanismParams,
    q: &JointAngles,
    theta_hint: Option<f64>,
) -> Result<FkResult, KinematicsError> {
    let solutions: Vec<Pose> = all_direct_solutions(params, q)?
        .into_iter()
        .filter(|p| p.theta.abs() <= params.theta_limit + 1e-9)
        .collect();
    let consistent: Vec<&Pose> = solutions.iter().filter(|p| ik_consistent(params, p, q)).collect();
    let pool: Vec<&Pose> = if consistent.is_empty() {
        solutions.iter().collect()
    } else {
        consistent
    };
    let best = match theta_hint {
        Some(hint) => pool.into_iter().min_by(|a, b| {
            let da = wrap_angle(a.theta - hint).abs();
            let db = wrap_angle(b.theta - hint).abs();
            da.total_cmp(&db)
        }),
        None => pool.into_iter().max_by(|a, b| a.z.total_cmp(&b.z)),
    }
    .ok_or(KinematicsError::NoRealRoot)?;
    let residual_norm = constraint_residual(params, best, q).norm();
    Ok(FkResult {
        pose: *best,
        residual_norm,
        method: FkMethod::Direct,
    })
}

/// Normalized conditioning of the closure at a pose; near zero at singularities.
pub fn conditioning(params: &MechanismParams, pose: &Pose, q: &JointAngles) -> f64 {
    normalized_determinant(&pose_partials(params, pose, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ik::{home_pose, inverse_kinematics};

    fn defaults() -> MechanismParams {
        MechanismParams::default()
    }

    #[test]
    fn home_roundtrip() {
        let p = defaults();
        let home = home_pose(&p);
        let q = inverse_kinematics(&p, &home, None).into_joints().unwrap();
        let fk = forward_kinematics_direct(&p, &q, None).unwrap();
        assert!(fk.pose.translation_distance(&home) < 1e-7, "{:?}", fk.pose);
        assert!(fk.pose.rotation_distance(&home) < 1e-9);
        assert!(fk.residual_norm < RESIDUAL_TOLERANCE);
    }

    #[test]
    fn symmetric_joints_give_centered_pose() {
        let p = defaults();
        for qv in [-0.3, 0.0, 0.2] {
            let q = JointAngles::new([qv; 4]);
            let fk = forward_kinematics_direct(&p, &q, None).unwrap();
            assert!(fk.pose.x.abs() < 1e-9 && fk.pose.y.abs() < 1e-9, "{:?}", fk.pose);
            assert!(fk.pose.theta.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_step_leaves_pose() {
        let p = defaults();
        let home = home_pose(&p);
        let q = inverse_kinematics(&p, &home, None).into_joints().unwrap();
        let fk = forward_kinematics_iterative(&p, &q, &q, &home, 1.0 / 1900.0).unwrap();
        assert!(fk.pose.translation_distance(&home) < 1e-12);
        assert_eq!(fk.method, FkMethod::Iterative);
    }

    #[test]
    fn small_step_matches_direct() {
        let p = defaults();
        let pose = Pose::new(1.0, -0.5, home_pose(&p).z + 0.7, 0.1);
        let q = inverse_kinematics(&p, &pose, None).into_joints().unwrap();
        let mut q2 = q;
        q2.q[0] += 1e-3;
        let it = forward_kinematics_iterative(&p, &q, &q2, &pose, 1.0 / 1900.0).unwrap();
        let direct = forward_kinematics_direct(&p, &q2, Some(pose.theta)).unwrap();
        assert!(it.pose.translation_distance(&direct.pose) < 1e-6);
        assert!(it.pose.rotation_distance(&direct.pose) < 1e-8);
    }

    #[test]
    fn unreachable_joints_have_no_root() {
        let mut p = defaults();
        p.lower_link = 1.0;
        let q = JointAngles::new([0.0, 0.5, -0.5, 0.1]);
        let err = forward_kinematics_direct(&p, &q, None).unwrap_err();
        assert!(
            matches!(
                err,
                KinematicsError::NoRealRoot | KinematicsError::DegenerateLinearSystem
            ),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_dt() {
        let p = defaults();
        let home = home_pose(&p);
        let q = JointAngles::new([0.0; 4]);
        assert!(forward_kinematics_iterative(&p, &q, &q, &home, 0.0).is_err());
    }
}
