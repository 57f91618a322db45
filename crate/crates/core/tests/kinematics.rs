use graspcommit::kinematics::{ArmModel, IkOptions, JointConfig, PlanarPose};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(arm: &ArmModel, rng: &mut impl Rng) -> Vec<f64> {
    arm.joint_lower()
        .iter()
        .zip(arm.joint_upper())
        .map(|(lo, hi)| rng.gen_range(*lo..*hi))
        .collect()
}

/// Central differences of FK, with the angle difference unwrapped.
fn fd_jacobian(arm: &ArmModel, q: &[f64], h: f64) -> Vec<[f64; 3]> {
    (0..q.len())
        .map(|j| {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[j] += h;
            qm[j] -= h;
            let p = arm.forward_kinematics(&qp).unwrap().ee;
            let m = arm.forward_kinematics(&qm).unwrap().ee;
            let dphi = (p.phi - m.phi + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            [
                (p.x - m.x) / (2.0 * h),
                (p.y - m.y) / (2.0 * h),
                dphi / (2.0 * h),
            ]
        })
        .collect()
}

#[test]
fn jacobian_matches_finite_differences_on_100_configs() {
    let arm = ArmModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = random_q(&arm, &mut rng);
        let jac = arm.jacobian(&q).unwrap();
        let fd = fd_jacobian(&arm, &q, 1e-6);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (j, col) in fd.iter().enumerate() {
            for r in 0..3 {
                num = num.max((jac[(r, j)] - col[r]).abs());
                den = den.max(col[r].abs());
            }
        }
        worst = worst.max(num / den);
    }
    assert!(worst < 1e-5, "worst relative Jacobian error {worst:e}");
}

#[test]
fn base_pose_offsets_and_rotates_the_chain() {
    let base = PlanarPose::new(0.5, -0.25, std::f64::consts::FRAC_PI_2);
    let arm = ArmModel::new(vec![1.0, 1.0], vec![-3.0; 2], vec![3.0; 2], base, 0.0, 0.0).unwrap();
    let ee = arm.forward_kinematics(&[0.0, 0.0]).unwrap().ee;
    assert!((ee.x - 0.5).abs() < 1e-12 && (ee.y - 1.75).abs() < 1e-12);
    assert!((ee.phi - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every IK success lands within the requested tolerance and the limits.
    #[test]
    fn ik_successes_round_trip(seed in any::<u64>()) {
        let arm = ArmModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = arm.forward_kinematics(&random_q(&arm, &mut rng)).unwrap().ee;
        let start = JointConfig::new(random_q(&arm, &mut rng));
        let opts = IkOptions::default();
        if let Ok(q) = arm.ik_solve(&target, &start, &opts) {
            prop_assert!(arm.within_limits(&q));
            let (ep, eo) = arm.forward_kinematics(&q).unwrap().ee.error_to(&target);
            prop_assert!(ep <= opts.tol && eo.abs() <= opts.tol);
        }
    }

    #[test]
    fn ee_heading_is_the_angle_sum(q in proptest::collection::vec(-2.5f64..2.5, 5)) {
        let arm = ArmModel::default();
        let ee = arm.forward_kinematics(&q).unwrap().ee;
        let sum: f64 = q.iter().sum();
        let diff = (ee.phi - sum).rem_euclid(std::f64::consts::TAU);
        prop_assert!(diff < 1e-9 || diff > std::f64::consts::TAU - 1e-9);
        prop_assert!(ee.phi > -std::f64::consts::PI && ee.phi <= std::f64::consts::PI);
    }
}
