#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactor::{home_pose, inverse_kinematics, JointAngles, MechanismParams, Pose};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample of the feasible pose set by rejection from a box that
/// encloses it, with the twist inside the plate's rotation stop.
pub fn feasible_pose(params: &MechanismParams, rng: &mut impl Rng) -> (Pose, JointAngles) {
    let home = home_pose(params);
    let s = params.length_scale() / 32.5;
    loop {
        let pose = Pose::new(
            rng.gen_range(-14.0..14.0) * s,
            rng.gen_range(-13.0..13.0) * s,
            home.z + rng.gen_range(-12.0..12.0) * s,
            rng.gen_range(-params.theta_limit..params.theta_limit),
        );
        let sol = inverse_kinematics(params, &pose, None);
        if sol.feasible {
            return (pose, sol.joints);
        }
    }
}

/// Newton on the closure with the joints fixed, run until the step stops
/// shrinking; independent of the library's stopping rule.
pub fn solve_pose(params: &MechanismParams, q: &JointAngles, start: Pose) -> Pose {
    let mut pose = start;
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let r = tactor::constraint_residual(params, &pose, q);
        let a = tactor::jacobian::pose_partials(params, &pose, q);
        let step = a.lu().solve(&r).expect("nonsingular closure");
        pose = Pose::from_vector(&(pose.to_vector() - step));
        let n = step.amax();
        if n == 0.0 || (n < 1e-13 && n >= last) {
            break;
        }
        last = n;
    }
    pose
}
