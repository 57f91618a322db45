use graspcommit::baselines::{
    fixed_goal_plan, goal_config, rrt_connect, rrt_connect_plan, variable_multi_plan,
    variable_single_plan, MethodId, RrtParams,
};
use graspcommit::collision::{trajectory_clearance, Obstacle};
use graspcommit::grasp::{sample_grasp, GraspConfig, GraspParams};
use graspcommit::harness::{Scene, Workspace};
use graspcommit::kinematics::{ArmModel, IkOptions, JointConfig, Point};
use graspcommit::optimizer::{linear_init, trajectory_cost, Trajectory};
use graspcommit::planner::PlannerParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene_with(obstacles: Vec<Obstacle>, start: JointConfig) -> Scene {
    Scene::new(
        "test",
        ArmModel::default(),
        obstacles,
        start,
        Some(GraspParams::disc(0.0, 0.04)),
        Workspace::default(),
        GraspConfig::default(),
    )
    .unwrap()
}

fn open_scene() -> Scene {
    scene_with(
        vec![Obstacle::disc(Point::new(-0.6, 0.7), 0.05).as_target()],
        JointConfig::zeros(5),
    )
}

#[test]
fn multi_with_one_attempt_is_single() {
    let scene = Scene::builtin("cylinder_2").unwrap();
    let params = PlannerParams::default();
    for seed in 0..4 {
        let a = variable_multi_plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(seed), 1);
        let b = variable_single_plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(
            (a.success, &a.trajectory, a.cost, a.grasp),
            (b.success, &b.trajectory, b.cost, b.grasp)
        );
    }
}

#[test]
fn multi_returns_the_cheapest_attempt() {
    let scene = Scene::builtin("cylinder_2").unwrap();
    let params = PlannerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = variable_multi_plan(&scene, &params, &mut rng, 5);
    assert_eq!(out.stats.solves.len(), 5);
    // replaying the attempts one at a time on the same stream
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let costs: Vec<f64> = (0..5)
        .filter_map(|_| variable_single_plan(&scene, &params, &mut rng).cost)
        .collect();
    if let Some(c) = out.cost {
        assert!(costs.iter().all(|x| c <= *x));
        assert!(costs.contains(&c));
    } else {
        assert!(costs.is_empty());
    }
}

#[test]
fn rrt_path_in_open_space_is_collision_free() {
    let scene = open_scene();
    let params = PlannerParams::default();
    let rrt = RrtParams::default();
    for seed in 0..5 {
        let out = rrt_connect_plan(&scene, &params, &rrt, &mut ChaCha8Rng::seed_from_u64(seed));
        assert!(out.success, "seed {seed}");
        let traj = out.trajectory.unwrap();
        assert_eq!(traj.len(), params.n_0);
        let c = trajectory_clearance(&scene.arm, &traj, &scene.obstacles, rrt.step / 10.0, true);
        assert!(
            c.min_distance >= -params.mu_max,
            "seed {seed}: {}",
            c.min_distance
        );
        let (pos, rot) = scene
            .arm
            .forward_kinematics(traj.last())
            .unwrap()
            .ee
            .error_to(&out.grasp.unwrap().pose);
        assert!(pos <= rrt.ik.tol && rot.abs() <= rrt.ik.tol);
    }
}

#[test]
fn raw_rrt_edges_are_free_at_fine_resolution() {
    let scene = Scene::builtin("cylinder_1").unwrap();
    let rrt = RrtParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pose = scene.fixed_grasp().unwrap().pose;
    let goal =
        goal_config(&scene.arm, &scene.obstacles, &pose, &rrt, &mut rng).expect("reachable grasp");
    let (path, nodes) = rrt_connect(
        &scene.arm,
        &scene.obstacles,
        &scene.start,
        &goal,
        &rrt,
        &mut rng,
    );
    let path = path.expect("a path exists");
    assert!(nodes <= rrt.max_nodes);
    assert_eq!(path.first(), Some(&scene.start));
    assert_eq!(path.last(), Some(&goal));
    for w in path.windows(2) {
        assert!(w[0].max_abs_diff(&w[1]) <= rrt.step + 1e-12);
    }
    let traj = Trajectory::new(path).unwrap();
    let c = trajectory_clearance(&scene.arm, &traj, &scene.obstacles, rrt.step / 10.0, true);
    // edges are checked at step / 5; finer sampling may find grazing contact
    assert!(c.min_distance > -1e-3, "{}", c.min_distance);
}

#[test]
fn rrt_fails_on_an_enclosed_target() {
    let c = Point::new(0.8, 0.4);
    let scene = scene_with(
        vec![
            Obstacle::rect(c + Point::new(0.0, 0.15), Point::new(0.17, 0.02)),
            Obstacle::rect(c - Point::new(0.0, 0.15), Point::new(0.17, 0.02)),
            Obstacle::rect(c + Point::new(0.15, 0.0), Point::new(0.02, 0.17)),
            Obstacle::rect(c - Point::new(0.15, 0.0), Point::new(0.02, 0.17)),
            Obstacle::disc(c, 0.05).as_target(),
        ],
        JointConfig::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0]),
    );
    let rrt = RrtParams {
        max_nodes: 2000,
        ..RrtParams::default()
    };
    let out = rrt_connect_plan(
        &scene,
        &PlannerParams::default(),
        &rrt,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    assert!(!out.success);
    assert!(out.stats.iterations <= rrt.max_nodes);
}

#[test]
fn rrt_from_the_grasp_itself_is_immediate() {
    let target = Obstacle::disc(Point::new(0.9, 0.3), 0.05).as_target();
    let seed = 12;
    // draw the grasp the planner will draw, then start the arm there
    let grasp = sample_grasp(
        &target,
        0,
        &GraspConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    let arm = ArmModel::default();
    let start = arm
        .ik_solve(
            &grasp.pose,
            &JointConfig::new(vec![0.3, 0.2, 0.1, 0.0, 0.0]),
            &IkOptions::with_tol(1e-8),
        )
        .unwrap();
    let scene = scene_with(vec![target], start.clone());
    let out = rrt_connect_plan(
        &scene,
        &PlannerParams::default(),
        &RrtParams::default(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    assert!(out.success);
    assert!(out.cost.unwrap() < 1e-12);
    assert_eq!(out.trajectory.unwrap().first(), &start);
}

#[test]
fn fixed_goal_is_deterministic() {
    let scene = Scene::builtin("box_table").unwrap();
    let params = PlannerParams::default();
    let a = fixed_goal_plan(&scene, &params).unwrap();
    let b = fixed_goal_plan(&scene, &params).unwrap();
    assert_eq!(
        (a.success, &a.trajectory, a.cost),
        (b.success, &b.trajectory, b.cost)
    );
}

#[test]
fn fixed_goal_needs_a_declared_grasp() {
    let mut scene = open_scene();
    scene.fixed_grasp = None;
    assert!(fixed_goal_plan(&scene, &PlannerParams::default()).is_err());
}

#[test]
fn fixed_goal_in_open_space_is_near_the_straight_path() {
    let scene = open_scene();
    let params = PlannerParams::default();
    let out = fixed_goal_plan(&scene, &params).unwrap();
    assert!(out.success);
    let goal = scene.fixed_grasp().unwrap().pose;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let best = (0..20)
        .filter_map(|_| {
            let seed = JointConfig::new(
                scene
                    .arm
                    .joint_lower()
                    .iter()
                    .zip(scene.arm.joint_upper())
                    .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                    .collect(),
            );
            scene.arm.ik_solve(&goal, &seed, &IkOptions::default()).ok()
        })
        .chain(
            scene
                .arm
                .ik_solve(&goal, &scene.start, &IkOptions::default())
                .ok(),
        )
        .map(|q| trajectory_cost(&linear_init(&scene.start, &q, params.n_0), None).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(
        out.cost.unwrap() <= 1.05 * best,
        "{} vs {}",
        out.cost.unwrap(),
        best
    );
}

#[test]
fn method_names_round_trip() {
    for m in MethodId::ALL {
        assert_eq!(m.name().parse::<MethodId>(), Ok(m));
        assert_eq!(m.is_random(), m != MethodId::FixedGoal);
    }
    assert!("prm".parse::<MethodId>().is_err());
}
