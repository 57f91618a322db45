use std::f64::consts::PI;

use graspcommit::collision::{
    config_clearance, sd_segment_disc, sd_segment_rect, trajectory_clearance, Disc, Obstacle, Rect,
    Shape, CLEARANCE_CAP,
};
use graspcommit::kinematics::{ArmModel, JointConfig, PlanarPose, Point};
use graspcommit::optimizer::Trajectory;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn random_shape(rng: &mut impl Rng) -> Shape {
    let c = p(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    if rng.gen_bool(0.5) {
        Shape::Rect(Rect::new(
            c,
            p(rng.gen_range(0.02..0.5), rng.gen_range(0.02..0.5)),
        ))
    } else {
        Shape::Disc(Disc::new(c, rng.gen_range(0.02..0.5)))
    }
}

fn random_segment(rng: &mut impl Rng) -> (Point, Point) {
    let mut pt = || p(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
    (pt(), pt())
}

fn inside(shape: &Shape, q: Point) -> bool {
    match shape {
        Shape::Rect(r) => {
            (q.x - r.center.x).abs() <= r.half_extents.x
                && (q.y - r.center.y).abs() <= r.half_extents.y
        }
        Shape::Disc(d) => (q - d.center).norm() <= d.radius,
    }
}

/// Samples the segment and reports whether any sample lies in the shape.
fn sampled_hit(shape: &Shape, a: Point, b: Point, samples: usize) -> bool {
    (0..samples).any(|i| inside(shape, a + (b - a) * (i as f64 / (samples - 1) as f64)))
}

fn sd(shape: &Shape, a: Point, b: Point) -> f64 {
    match shape {
        Shape::Rect(r) => sd_segment_rect(a, b, r),
        Shape::Disc(d) => sd_segment_disc(a, b, d),
    }
}

#[test]
fn sign_agrees_with_dense_sampling_on_10k_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    for i in 0..10_000 {
        let shape = random_shape(&mut rng);
        let (a, b) = random_segment(&mut rng);
        let d = sd(&shape, a, b);
        let oracle = sampled_hit(&shape, a, b, 2000);
        // a sampled miss can only hide a crossing shorter than the spacing
        assert_eq!(
            d < 0.0,
            oracle,
            "pair {i}: sd {d} vs oracle hit {oracle}, {shape:?} {a:?} {b:?}"
        );
        hits += oracle as usize;
    }
    assert!(
        hits > 1000 && hits < 9000,
        "degenerate sample mix: {hits} hits"
    );
}

/// Golden-section search for the closest point on the segment.
fn golden_distance(a: Point, b: Point, c: Point) -> f64 {
    let f = |t: f64| (a + (b - a) * t - c).norm();
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

#[test]
fn disc_distance_matches_golden_section_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let disc = Disc::new(
            p(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            rng.gen_range(0.01..0.6),
        );
        let (a, b) = random_segment(&mut rng);
        let expected = golden_distance(a, b, disc.center) - disc.radius;
        let got = sd_segment_disc(a, b, &disc);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }
}

fn point_rect_distance(q: Point, r: &Rect) -> f64 {
    let d = (q - r.center).abs() - r.half_extents;
    p(d.x.max(0.0), d.y.max(0.0)).norm()
}

/// Separation by dense sampling; penetration as the smallest projected
/// overlap over a fine fan of directions.
fn rect_oracle(a: Point, b: Point, r: &Rect) -> f64 {
    let lo = r.min();
    let hi = r.max();
    let corners = [lo, p(hi.x, lo.y), hi, p(lo.x, hi.y)];
    if sampled_hit(&Shape::Rect(*r), a, b, 4000) {
        -(0..36_000)
            .map(|k| {
                let th = PI * k as f64 / 36_000.0;
                let u = p(th.cos(), th.sin());
                let (s0, s1) = (a.dot(&u).min(b.dot(&u)), a.dot(&u).max(b.dot(&u)));
                let proj = corners.iter().map(|c| c.dot(&u));
                let c0 = proj.clone().fold(f64::INFINITY, f64::min);
                let c1 = proj.fold(f64::NEG_INFINITY, f64::max);
                (s1 - c0).min(c1 - s0)
            })
            .fold(f64::INFINITY, f64::min)
    } else {
        (0..=4000)
            .map(|i| point_rect_distance(a + (b - a) * (i as f64 / 4000.0), r))
            .fold(f64::INFINITY, f64::min)
    }
}

#[test]
fn rect_distance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let r = Rect::new(
            p(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
            p(rng.gen_range(0.05..0.5), rng.gen_range(0.05..0.5)),
        );
        let (a, b) = random_segment(&mut rng);
        let got = sd_segment_rect(a, b, &r);
        let oracle = rect_oracle(a, b, &r);
        if got >= 0.0 {
            // sampling overestimates by at most half the spacing
            assert!(
                got <= oracle + 1e-12 && oracle - got < 1e-3,
                "{got} vs {oracle}"
            );
        } else {
            // no fan direction beats the exact minimum translation
            assert!(
                got >= oracle - 1e-12 && got - oracle < 1e-4,
                "{got} vs {oracle}"
            );
        }
    }
}

/// The contact normal is the derivative of the signed distance under rigid
/// motion of the segment, evaluated at the witness point.
#[test]
fn contact_normal_matches_rigid_motion_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-7;
    let mut checked = 0;
    while checked < 500 {
        let shape = random_shape(&mut rng);
        let (a, b) = random_segment(&mut rng);
        let c = shape.segment_contact(a, b);
        let pivot = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let dir = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let omega = rng.gen_range(-1.0..1.0);
        let moved = |t: f64, q: Point| {
            let r = q - pivot;
            let (s, co) = (omega * t).sin_cos();
            pivot + p(co * r.x - s * r.y, s * r.x + co * r.y) + dir * t
        };
        let plus = shape.segment_contact(moved(h, a), moved(h, b)).distance;
        let minus = shape.segment_contact(moved(-h, a), moved(-h, b)).distance;
        let fd = (plus - minus) / (2.0 * h);
        let r = c.point - pivot;
        let velocity = dir + p(-omega * r.y, omega * r.x);
        let analytic = c.normal.dot(&velocity);
        // skip the measure-zero kinks where the active feature switches
        let one_sided = ((plus - c.distance) / h - (c.distance - minus) / h).abs();
        if one_sided > 1e-4 {
            continue;
        }
        assert!(
            (fd - analytic).abs() < 1e-5 * (1.0 + analytic.abs()),
            "fd {fd} vs {analytic} for {shape:?} {a:?} {b:?}"
        );
        checked += 1;
    }
}

fn planar_arm() -> ArmModel {
    ArmModel::new(
        vec![1.0, 1.0],
        vec![-PI; 2],
        vec![PI; 2],
        PlanarPose::new(0.0, 0.0, 0.0),
        0.04,
        0.02,
    )
    .unwrap()
}

#[test]
fn straight_arm_clearance_is_the_face_gap() {
    let arm = planar_arm();
    let obstacles = [Obstacle::rect(p(1.0, 0.6), p(0.5, 0.1))];
    let r = config_clearance(&arm, &JointConfig::new(vec![0.0, 0.0]), &obstacles, false);
    assert!(
        (r.min_distance - (0.5 - 0.02)).abs() < 1e-9,
        "{}",
        r.min_distance
    );
    let empty = config_clearance(&arm, &JointConfig::new(vec![0.0, 0.0]), &[], false);
    assert_eq!(empty.min_distance, CLEARANCE_CAP);
    assert!(empty.witness.is_none());
}

#[test]
fn target_is_skipped_unless_requested() {
    let arm = planar_arm();
    let obstacles = [Obstacle::disc(p(1.0, 0.0), 0.1).as_target()];
    let q = JointConfig::new(vec![0.0, 0.0]);
    assert_eq!(
        config_clearance(&arm, &q, &obstacles, false).min_distance,
        CLEARANCE_CAP
    );
    assert!(config_clearance(&arm, &q, &obstacles, true).min_distance < 0.0);
}

#[test]
fn interpolation_detects_tunneling() {
    // the arm sweeps through a post at 45 degrees while both ends are clear
    let arm = planar_arm();
    let post = [Obstacle::disc(p(1.2, 1.2), 0.1)];
    let from = JointConfig::new(vec![0.0, 0.0]);
    let to = JointConfig::new(vec![PI / 2.0, 0.0]);
    assert!(config_clearance(&arm, &from, &post, false).min_distance > 0.5);
    assert!(config_clearance(&arm, &to, &post, false).min_distance > 0.5);
    let traj = Trajectory::new(vec![from.clone(), to]).unwrap();
    let r = trajectory_clearance(&arm, &traj, &post, 0.01, false);
    assert!(r.min_distance < 0.0, "{}", r.min_distance);
    let w = r.witness.unwrap();
    assert!(w.waypoint <= 1 && w.obstacle == 0 && w.link < 2);

    let single = Trajectory::new(vec![from.clone(), from.clone()]).unwrap();
    let same = trajectory_clearance(&arm, &single, &post, 0.01, false);
    assert_eq!(
        same.min_distance,
        config_clearance(&arm, &from, &post, false).min_distance
    );
}

fn segment() -> impl Strategy<Value = (Point, Point)> {
    (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5)
        .prop_map(|(a, b, c, d)| (p(a, b), p(c, d)))
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (-0.5f64..0.5, -0.5f64..0.5, 0.01f64..0.6, 0.01f64..0.6)
            .prop_map(|(x, y, w, h)| Shape::Rect(Rect::new(p(x, y), p(w, h)))),
        (-0.5f64..0.5, -0.5f64..0.5, 0.01f64..0.6)
            .prop_map(|(x, y, r)| Shape::Disc(Disc::new(p(x, y), r))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn symmetric_in_endpoints(s in shape(), (a, b) in segment()) {
        let d1 = s.segment_contact(a, b).distance;
        let d2 = s.segment_contact(b, a).distance;
        prop_assert!((d1 - d2).abs() < 1e-12, "{} vs {}", d1, d2);
    }

    #[test]
    fn translation_equivariant(s in shape(), (a, b) in segment(), tx in -3.0f64..3.0, ty in -3.0f64..3.0) {
        let t = p(tx, ty);
        let d1 = s.segment_contact(a, b).distance;
        let d2 = s.translated(t).segment_contact(a + t, b + t).distance;
        prop_assert!((d1 - d2).abs() < 1e-12, "{} vs {}", d1, d2);
    }

    #[test]
    fn halving_resolution_never_raises_clearance(
        q in proptest::collection::vec(proptest::collection::vec(-2.5f64..2.5, 5), 2..5),
        res in 0.005f64..0.5,
    ) {
        let arm = ArmModel::default();
        let obstacles = [
            Obstacle::rect(p(0.6, 0.3), p(0.1, 0.2)),
            Obstacle::disc(p(-0.4, 0.7), 0.15),
        ];
        let traj = Trajectory::new(q.into_iter().map(JointConfig::new).collect()).unwrap();
        let coarse = trajectory_clearance(&arm, &traj, &obstacles, res, true).min_distance;
        let fine = trajectory_clearance(&arm, &traj, &obstacles, res / 2.0, true).min_distance;
        prop_assert!(fine <= coarse);
    }
}
