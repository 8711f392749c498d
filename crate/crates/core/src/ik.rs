//! Closed-form inverse kinematics.
//!
//! Each leg's closure reduces to `I sin q + J cos q + K = 0`. With the
//! half-angle substitution `t = tan(q/2)` this is the quadratic
//! `(K - J) t^2 + 2 I t + (K + J) = 0`, whose discriminant (over four) is
//! `I^2 + J^2 - K^2`.

use nalgebra::Vector3;

use crate::error::KinematicsError;
use crate::geometry::{base_point, db_vector};
use crate::params::{Leg, MechanismParams};
use crate::types::{Branch, JointAngles, Pose};

/// Coefficients of `I sin q + J cos q + K = 0` for one leg, mm².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IjkCoefficients {
    pub i: f64,
    pub j: f64,
    pub k: f64,
}

impl IjkCoefficients {
    pub fn discriminant(&self) -> f64 {
        self.i * self.i + self.j * self.j - self.k * self.k
    }

    /// Value of `I sin q + J cos q + K`.
    pub fn evaluate(&self, q: f64) -> f64 {
        let (s, c) = q.sin_cos();
        self.i * s + self.j * c + self.k
    }

    /// Both roots, `[minus, plus]`, or `None` when the discriminant is negative.
    /// A root at `q = pi` (infinite half-angle tangent) is reported as `pi`.
    pub fn roots(&self) -> Option<[f64; 2]> {
        let disc = self.discriminant();
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let a = self.k - self.j;
        let scale = self.k.abs() + self.j.abs();
        if a.abs() <= 1e-12 * scale {
            // Leading coefficient vanishes: the equation is linear in t.
            if self.i == 0.0 {
                return None;
            }
            let t = -(self.k + self.j) / (2.0 * self.i);
            let finite = 2.0 * t.atan();
            let at_pi = if self.i > 0.0 {
                -std::f64::consts::PI
            } else {
                std::f64::consts::PI
            };
            let (minus, plus) = if finite <= at_pi {
                (finite, at_pi)
            } else {
                (at_pi, finite)
            };
            return Some([minus, plus]);
        }
        // Cancellation-free form of (-I -/+ sqrt) / (K - J).
        let qq = -(self.i + self.i.signum() * sq);
        if qq == 0.0 {
            return Some([0.0, 0.0]);
        }
        let (t_minus, t_plus) = if self.i >= 0.0 {
            (qq / a, (self.k + self.j) / qq)
        } else {
            ((self.k + self.j) / qq, qq / a)
        };
        Some([2.0 * t_minus.atan(), 2.0 * t_plus.atan()])
    }
}

/// `(X_i, Y_i, Z_i)`: tactor position shifted by `DB_i` and expressed
/// relative to the actuated joint `P_i`.
pub fn shifted_position(params: &MechanismParams, leg: Leg, pose: &Pose) -> Vector3<f64> {
    pose.position() + db_vector(params, leg, pose.theta) - base_point(params, leg)
}

pub fn ijk_coefficients(params: &MechanismParams, leg: Leg, shifted: &Vector3<f64>) -> IjkCoefficients {
    let big_l = params.upper_link;
    let (sp, cp) = params.azimuths[leg.index()].sin_cos();
    IjkCoefficients {
        i: 2.0 * shifted.z * big_l,
        j: -2.0 * shifted.x * big_l * cp - 2.0 * shifted.y * big_l * sp,
        k: big_l * big_l - params.lower_link * params.lower_link + shifted.norm_squared(),
    }
}

/// Why an IK query has no usable solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IkIssue {
    /// Negative discriminant: the leg cannot reach.
    Unreachable { leg: Leg },
    /// Roots exist but none lies inside the joint limits.
    JointLimit { leg: Leg, angle: f64 },
    /// Degenerate coefficients with no finite root.
    Singular { leg: Leg },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub joints: JointAngles,
    pub feasible: bool,
    /// `I^2 + J^2 - K^2` per leg, mm⁴.
    pub discriminants: [f64; 4],
    pub issue: Option<IkIssue>,
}

impl IkSolution {
    pub fn into_joints(self) -> Result<JointAngles, KinematicsError> {
        match self.issue {
            None => Ok(self.joints),
            Some(IkIssue::Unreachable { leg }) => Err(KinematicsError::Infeasible {
                leg: leg.number(),
                discriminant: self.discriminants[leg.index()],
            }),
            Some(IkIssue::JointLimit { leg, angle }) => Err(KinematicsError::JointLimit {
                leg: leg.number(),
                angle,
            }),
            Some(IkIssue::Singular { leg }) => Err(KinematicsError::Singular { leg: leg.number() }),
        }
    }
}

/// Solves the four legs independently.
///
/// Roots inside the joint limits are preferred. Among those, the root
/// nearest the hint wins when one is given, otherwise the smaller `|q|`;
/// ties go to the minus branch.
pub fn inverse_kinematics(params: &MechanismParams, pose: &Pose, hint: Option<&JointAngles>) -> IkSolution {
    let mut joints = JointAngles::default();
    let mut discriminants = [0.0; 4];
    let mut issue = None;
    for leg in Leg::ALL {
        let idx = leg.index();
        let coeffs = ijk_coefficients(params, leg, &shifted_position(params, leg, pose));
        discriminants[idx] = coeffs.discriminant();
        let roots = match coeffs.roots() {
            Some(r) => r,
            None => {
                joints.q[idx] = f64::NAN;
                if issue.is_none() {
                    issue = Some(if discriminants[idx] < 0.0 || !discriminants[idx].is_finite() {
                        IkIssue::Unreachable { leg }
                    } else {
                        IkIssue::Singular { leg }
                    });
                }
                continue;
            }
        };
        let (q, branch) = select_root(params, roots, hint.map(|h| h.q[idx]));
        joints.q[idx] = q;
        joints.branch[idx] = branch;
        if issue.is_none() && !params.within_q_limits(q) {
            issue = Some(IkIssue::JointLimit { leg, angle: q });
        }
    }
    IkSolution {
        joints,
        feasible: issue.is_none(),
        discriminants,
        issue,
    }
}

fn select_root(params: &MechanismParams, roots: [f64; 2], hint: Option<f64>) -> (f64, Branch) {
    let candidates = [(roots[0], Branch::Minus), (roots[1], Branch::Plus)];
    let in_limits: Vec<_> = candidates
        .iter()
        .copied()
        .filter(|(q, _)| params.within_q_limits(*q))
        .collect();
    let pool: &[(f64, Branch)] = if in_limits.is_empty() { &candidates } else { &in_limits };
    let cost = |q: f64| match hint {
        Some(h) => (q - h).abs(),
        None => q.abs(),
    };
    // Minus comes first, so a strict comparison breaks ties toward it.
    let mut best = pool[0];
    for &cand in &pool[1..] {
        if cost(cand.0) < cost(best.0) {
            best = cand;
        }
    }
    best
}

/// Feasibility-only check, cheaper than building a full [`IkSolution`].
pub fn is_reachable(params: &MechanismParams, pose: &Pose) -> bool {
    Leg::ALL.iter().all(|&leg| {
        let coeffs = ijk_coefficients(params, leg, &shifted_position(params, leg, pose));
        match coeffs.roots() {
            Some([a, b]) => params.within_q_limits(a) || params.within_q_limits(b),
            None => false,
        }
    })
}

/// Height of the centered pose `(0, 0, z, 0)` at which every upper link is
/// horizontal (`q = 0`), parallelograms rising toward the plate.
///
/// Returns `None` when the parallelogram cannot span the horizontal gap.
pub fn home_height(params: &MechanismParams) -> Option<f64> {
    let leg = Leg::One;
    // With q = 0 the elbow A sits at P + L (cos phi, sin phi, 0).
    let elbow = base_point(params, leg) + crate::geometry::upper_link_vector(params, leg, 0.0);
    let joint = db_vector(params, leg, 0.0);
    let gap2 = (joint.x - elbow.x).powi(2) + (joint.y - elbow.y).powi(2);
    let l2 = params.lower_link * params.lower_link;
    if gap2 > l2 {
        return None;
    }
    Some(params.base_z + (l2 - gap2).sqrt())
}

/// Centered home pose; falls back to `z = base_z + l` for geometries where
/// the horizontal-link configuration does not exist.
pub fn home_pose(params: &MechanismParams) -> Pose {
    let z = home_height(params).unwrap_or(params.base_z + params.lower_link);
    Pose::new(0.0, 0.0, z, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::constraint_residual;
    use proptest::prelude::*;

    fn defaults() -> MechanismParams {
        MechanismParams::default()
    }

    #[test]
    fn coefficients_at_origin() {
        let p = defaults();
        let c = ijk_coefficients(&p, Leg::One, &Vector3::zeros());
        assert_eq!(c.i, 0.0);
        assert_eq!(c.j, 0.0);
        assert!((c.k - 81.25).abs() < 1e-12);
    }

    #[test]
    fn coefficient_i_from_height() {
        let p = defaults();
        let c = ijk_coefficients(&p, Leg::Two, &Vector3::new(3.0, -2.0, 10.0));
        assert!((c.i - 350.0).abs() < 1e-12);
    }

    /// Leg-1 closure with q = 0, located by bisection on z.
    fn home_height_by_bisection(p: &MechanismParams) -> f64 {
        let f = |z: f64| constraint_residual(p, &Pose::new(0.0, 0.0, z, 0.0), &JointAngles::new([0.0; 4]))[0];
        let (mut lo, mut hi) = (p.base_z, p.base_z + p.lower_link);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn home_height_matches_bisection_oracle() {
        let p = defaults();
        let z = home_height(&p).unwrap();
        assert!((z - home_height_by_bisection(&p)).abs() < 1e-10);
    }

    #[test]
    fn centered_pose_gives_equal_angles() {
        let p = defaults();
        let sol = inverse_kinematics(&p, &home_pose(&p), None);
        assert!(sol.feasible);
        for q in sol.joints.q {
            assert!(q.abs() < 1e-12, "{:?}", sol.joints.q);
        }
        let sol = inverse_kinematics(&p, &Pose::new(0.0, 0.0, home_pose(&p).z + 2.0, 0.0), None);
        let q = sol.joints.q;
        assert!(q.iter().all(|x| (x - q[0]).abs() < 1e-12));
    }

    #[test]
    fn unreachable_height() {
        let p = defaults();
        let sol = inverse_kinematics(&p, &Pose::new(0.0, 0.0, 500.0, 0.0), None);
        assert!(!sol.feasible);
        assert!(sol.discriminants.iter().all(|d| *d < 0.0));
        assert!(matches!(sol.into_joints(), Err(KinematicsError::Infeasible { .. })));
    }

    #[test]
    fn joint_limit_reported() {
        let mut p = defaults();
        p.q_limits = [-0.01, 0.01];
        let pose = Pose::new(0.0, 0.0, home_pose(&p).z + 3.0, 0.0);
        let sol = inverse_kinematics(&p, &pose, None);
        assert!(!sol.feasible);
        assert!(matches!(sol.issue, Some(IkIssue::JointLimit { .. })));
    }

    #[test]
    fn vanishing_leading_coefficient_uses_linear_root() {
        // K = J exactly: 2 I t + 2 K = 0.
        let c = IjkCoefficients {
            i: 50.0,
            j: 20.0,
            k: 20.0,
        };
        let roots = c.roots().unwrap();
        let finite = roots.iter().copied().find(|q| q.abs() < 3.0).unwrap();
        assert!((finite - 2.0 * (-20.0f64 / 50.0).atan()).abs() < 1e-15);
        for q in roots {
            assert!(c.evaluate(q).abs() < 1e-9);
        }
        let none = IjkCoefficients { i: 0.0, j: 5.0, k: 5.0 };
        assert!(none.roots().is_none());
    }

    #[test]
    fn hint_selects_nearest_branch() {
        let p = defaults();
        let pose = Pose::new(1.0, -2.0, home_pose(&p).z + 1.0, 0.2);
        let mut wide = p.clone();
        wide.q_limits = [-3.2, 3.2];
        let default = inverse_kinematics(&wide, &pose, None).joints;
        let mut far = default;
        for (i, coeffs) in Leg::ALL
            .iter()
            .map(|&leg| ijk_coefficients(&wide, leg, &shifted_position(&wide, leg, &pose)))
            .enumerate()
        {
            let roots = coeffs.roots().unwrap();
            far.q[i] = if (roots[0] - default.q[i]).abs() < 1e-12 {
                roots[1]
            } else {
                roots[0]
            };
        }
        let hinted = inverse_kinematics(&wide, &pose, Some(&far)).joints;
        assert!(hinted.max_abs_diff(&far) < 1e-12);
    }

    proptest! {
        #[test]
        fn both_roots_satisfy_trig_equation(
            x in -12.0f64..12.0, y in -12.0f64..12.0, dz in -8.0f64..8.0, theta in -0.5f64..0.5, leg in 1usize..=4
        ) {
            let p = defaults();
            let pose = Pose::new(x, y, home_pose(&p).z + dz, theta);
            let leg = Leg::from_number(leg).unwrap();
            let c = ijk_coefficients(&p, leg, &shifted_position(&p, leg, &pose));
            if let Some(roots) = c.roots() {
                for q in roots {
                    prop_assert!(c.evaluate(q).abs() < 1e-9 * (1.0 + c.k.abs()), "{} {}", q, c.evaluate(q));
                }
            }
        }

        #[test]
        fn feasible_solutions_close_every_leg(
            x in -12.0f64..12.0, y in -12.0f64..12.0, dz in -8.0f64..8.0, theta in -0.5f64..0.5
        ) {
            let p = defaults();
            let pose = Pose::new(x, y, home_pose(&p).z + dz, theta);
            let sol = inverse_kinematics(&p, &pose, None);
            if sol.feasible {
                let r = constraint_residual(&p, &pose, &sol.joints);
                prop_assert!(r.amax() < 1e-9, "{}", r);
                prop_assert!(sol.joints.q.iter().all(|q| p.within_q_limits(*q)));
            }
            prop_assert_eq!(sol.feasible, is_reachable(&p, &pose));
        }
    }
}
