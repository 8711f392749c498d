mod common;

use nalgebra::Vector4;
use proptest::prelude::*;
use rand::Rng;
use tactor::statics::*;
use tactor::workspace::*;
use tactor::{constraint_residual, home_pose, inverse_kinematics, MechanismParams, Pose, Wrench};

use common::{feasible_pose, rng, solve_pose};

fn wrench_strategy() -> impl Strategy<Value = Wrench> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -5.0..5.0f64).prop_map(|(a, b, c, d)| Wrench::new(a, b, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn virtual_work_balances(seed in any::<u64>(), w in wrench_strategy()) {
        // tau . dq must equal w . dp for a small joint motion, with dp from an
        // independent closure solve.
        let p = MechanismParams::default();
        let mut r = rng(seed);
        let (pose, q) = feasible_pose(&p, &mut r);
        let tau = joint_torques_for_wrench(&p, &pose, &q, &w).unwrap();
        let dq = Vector4::from_fn(|_, _| r.gen_range(-1.0..1.0)) * 1e-6;
        let mut qp = q;
        let mut qm = q;
        for i in 0..4 {
            qp.q[i] += dq[i];
            qm.q[i] -= dq[i];
        }
        let dp = 0.5 * (solve_pose(&p, &qp, pose).to_vector() - solve_pose(&p, &qm, pose).to_vector());
        let lhs = tau.dot(&dq);
        let rhs = w.to_vector().dot(&dp);
        prop_assert!((lhs - rhs).abs() <= 1e-6 * tau.norm() * dq.norm() + 1e-15, "{lhs} vs {rhs}");
    }

    #[test]
    fn transpose_roundtrip(seed in any::<u64>(), w in wrench_strategy()) {
        let p = MechanismParams::default();
        let (pose, q) = feasible_pose(&p, &mut rng(seed));
        let tau = joint_torques_for_wrench(&p, &pose, &q, &w).unwrap();
        let back = wrench_for_joint_torques(&p, &pose, &q, &tau).unwrap();
        prop_assert!((back.to_vector() - w.to_vector()).amax() < 1e-9 * (1.0 + w.to_vector().amax()));
    }

    #[test]
    fn capacity_saturates_exactly_one_limit(seed in any::<u64>(), d in prop::array::uniform4(-1.0..1.0f64)) {
        let p = MechanismParams::default();
        let (pose, q) = feasible_pose(&p, &mut rng(seed));
        let dir = Vector4::from(d);
        prop_assume!(dir.norm() > 1e-3);
        let cap = max_wrench(&p, &pose, &q, &dir).unwrap();
        prop_assert!(cap.is_finite() && cap > 0.0);
        let w = Wrench::from_vector(&(dir.normalize() * cap));
        let tau = joint_torques_for_wrench(&p, &pose, &q, &w).unwrap();
        prop_assert!((tau.amax() - p.tau_max).abs() < 1e-9 * p.tau_max);
    }

    #[test]
    fn capacity_is_homogeneous_in_tau_max(seed in any::<u64>(), s in 0.1..10.0f64) {
        let p = MechanismParams::default();
        let (pose, q) = feasible_pose(&p, &mut rng(seed));
        let mut scaled = p.clone();
        scaled.tau_max *= s;
        for axis in AxisDirection::ALL {
            let a = max_wrench(&p, &pose, &q, &axis.vector()).unwrap();
            let b = max_wrench(&scaled, &pose, &q, &axis.vector()).unwrap();
            prop_assert!((b - s * a).abs() < 1e-12 * b.max(1.0));
        }
    }
}

#[test]
fn home_capacity_is_sign_symmetric() {
    let p = MechanismParams::default();
    let report = capacity_report(&p, &home_pose(&p)).unwrap();
    for pair in report.chunks(2) {
        assert!((pair[0].capacity - pair[1].capacity).abs() < 1e-12, "{pair:?}");
    }
}

fn coarse() -> WorkspaceGrid {
    sweep_workspace(&MechanismParams::default(), 1.0, 2f64.to_radians()).unwrap()
}

#[test]
fn sampled_cells_agree_with_inverse_kinematics() {
    let p = MechanismParams::default();
    let g = coarse();
    let mut r = rng(21);
    let picks = (g.cells.len() / 100).max(50);
    for _ in 0..picks {
        let c = &g.cells[r.gen_range(0..g.cells.len())];
        let pose = Pose::new(c.center[0], c.center[1], c.center[2], 0.0);
        let sol = inverse_kinematics(&p, &pose, None);
        assert_eq!(sol.feasible, c.reachable, "{c:?}");
        if c.reachable {
            assert!(constraint_residual(&p, &pose, &sol.joints).amax() < 1e-9);
            for theta in [c.max_rotation_pos, -c.max_rotation_neg] {
                let tilted = Pose { theta, ..pose };
                assert!(inverse_kinematics(&p, &tilted, None).feasible, "{c:?} at {theta}");
            }
        }
    }
}

#[test]
fn boundary_shell_is_unreachable() {
    let g = coarse();
    let [nx, ny, nz] = g.dims;
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let edge = ix == 0 || iy == 0 || iz == 0 || ix == nx - 1 || iy == ny - 1 || iz == nz - 1;
                if edge {
                    assert!(!g.cell(ix, iy, iz).reachable);
                }
            }
        }
    }
}

#[test]
fn dexterous_box_only_holds_qualifying_cells() {
    let g = coarse();
    // A zero threshold is vacuous and yields the reachable bounds instead.
    let bounds = g.reachable_bounds().unwrap();
    assert_eq!(dexterous_cube(&g, 0.0).unwrap(), bounds);
    let mut last = bounds.volume();
    for deg in [2.0, 20.0, 40.0, 60.0] {
        let need = f64::to_radians(deg);
        let b = dexterous_cube(&g, need).unwrap();
        for c in g.cells.iter().filter(|c| b.contains(&c.center)) {
            assert!(c.reachable && c.total_rotation() >= need - 1e-12, "{deg}: {c:?}");
        }
        assert!(b.volume() <= last);
        last = b.volume();
    }
}
