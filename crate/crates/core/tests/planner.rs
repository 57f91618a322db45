use graspcommit::baselines::variable_single_plan;
use graspcommit::collision::Obstacle;
use graspcommit::grasp::{GraspConfig, GraspParams, GraspPose};
use graspcommit::harness::{Scene, Workspace};
use graspcommit::kinematics::{ArmModel, JointConfig, Point};
use graspcommit::optimizer::{linear_init, trajectory_cost, TrajectoryOptimizer};
use graspcommit::planner::{plan, refine, PlannerParams, PlannerState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn open_scene(extra: Vec<Obstacle>) -> Scene {
    let mut obstacles = extra;
    obstacles.push(Obstacle::disc(Point::new(-0.6, 0.7), 0.05).as_target());
    Scene::new(
        "open",
        ArmModel::default(),
        obstacles,
        JointConfig::zeros(5),
        None,
        Workspace::default(),
        GraspConfig::default(),
    )
    .unwrap()
}

fn check_invariants(scene: &Scene, params: &PlannerParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = plan(scene, params, &mut rng).unwrap();
    let trace = &out.stats.trace;
    assert_eq!(trace.len(), params.max_iters);
    let mut mu = params.mu_0;
    let mut s_thres = 1;
    for t in trace {
        assert_eq!(t.committed + t.n, params.n_0);
        assert!(t.committed <= params.max_committed());
        assert!(t.mu <= mu && t.mu >= params.mu_max);
        assert!(t.s <= t.s_thres);
        match t.commitment {
            Some(_) => assert_eq!(t.s_thres, s_thres + 1),
            None => assert_eq!(t.s_thres, s_thres),
        }
        if t.commitment.is_none() {
            assert_eq!(t.mu, mu);
        }
        mu = t.mu;
        s_thres = t.s_thres;
    }
    if out.success {
        let traj = out.trajectory.as_ref().unwrap();
        assert_eq!(traj.len(), params.n_0);
        assert_eq!(traj.first(), &scene.start);
        assert_eq!(out.cost, Some(trajectory_cost(traj, None).unwrap()));
    }
    let refinements = trace.iter().filter(|t| t.refinement.is_some()).count();
    assert_eq!(refinements, out.stats.refinements);
    assert_eq!(out.stats.refinement_log.len(), refinements);
}

#[test]
fn loop_invariants_hold_on_a_shipped_scene() {
    let scene = Scene::builtin("cylinder_2").unwrap();
    check_invariants(&scene, &PlannerParams::default(), 1);
}

#[test]
fn loop_invariants_hold_with_a_tight_cap() {
    let scene = open_scene(vec![]);
    let params = PlannerParams {
        n_0: 12,
        commit_fraction: 0.4,
        commit_cap: 0.3,
        max_iters: 15,
        ..PlannerParams::default()
    };
    check_invariants(&scene, &params, 2);
}

#[test]
fn single_iteration_matches_single_solve_plus_refinement() {
    let scene = open_scene(vec![]);
    let params = PlannerParams {
        max_iters: 1,
        mu_0: 0.01,
        ..PlannerParams::default()
    };
    let mut compared = 0;
    for seed in 0..5 {
        let out = plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let single = variable_single_plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(out.stats.solves[0].success, single.success);
        if !single.success {
            assert!(!out.success);
            continue;
        }
        let grasp = single.grasp.unwrap();
        assert_eq!(out.grasp, Some(grasp));
        let optimizer = TrajectoryOptimizer::new(&scene.arm, &scene.obstacles);
        let state = PlannerState::new(scene.start.clone(), &params);
        let refined = refine(
            &optimizer,
            &state,
            single.trajectory.as_ref().unwrap(),
            &grasp,
            &params,
        );
        assert_eq!(out.success, refined.result.success);
        assert_eq!(out.trajectory.as_ref(), Some(&refined.result.trajectory));
        assert_eq!(out.cost, Some(refined.result.cost));
        compared += 1;
    }
    assert!(
        compared >= 3,
        "only {compared} seeds reached the refinement"
    );
}

fn enclosed_scene() -> Scene {
    let c = Point::new(0.8, 0.4);
    let walls = vec![
        Obstacle::rect(c + Point::new(0.0, 0.15), Point::new(0.17, 0.02)),
        Obstacle::rect(c - Point::new(0.0, 0.15), Point::new(0.17, 0.02)),
        Obstacle::rect(c + Point::new(0.15, 0.0), Point::new(0.02, 0.17)),
        Obstacle::rect(c - Point::new(0.15, 0.0), Point::new(0.02, 0.17)),
        Obstacle::disc(c, 0.05).as_target(),
    ];
    Scene::new(
        "enclosed",
        ArmModel::default(),
        walls,
        JointConfig::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0]),
        None,
        Workspace::default(),
        GraspConfig::default(),
    )
    .unwrap()
}

#[test]
fn enclosed_target_fails_without_candidates() {
    let scene = enclosed_scene();
    let params = PlannerParams {
        max_iters: 6,
        ..PlannerParams::default()
    };
    let out = plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(!out.success);
    assert!(out.trajectory.is_none() && out.cost.is_none());
    assert!(out.stats.refinement_log.iter().all(|r| !r.success));
}

#[test]
fn same_seed_same_outcome() {
    let scene = Scene::builtin("cylinder_2").unwrap();
    let params = PlannerParams {
        max_iters: 12,
        ..PlannerParams::default()
    };
    let a = plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = plan(&scene, &params, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.cost.map(f64::to_bits), b.cost.map(f64::to_bits));
    assert_eq!(a.grasp, b.grasp);
    assert_eq!(
        (
            a.stats.iterations,
            a.stats.commitment_steps,
            a.stats.commits,
            a.stats.refinements
        ),
        (
            b.stats.iterations,
            b.stats.commitment_steps,
            b.stats.commits,
            b.stats.refinements
        )
    );
    assert_eq!(a.stats.trace, b.stats.trace);
}

fn grasp_on(scene: &Scene, q: &JointConfig) -> GraspPose {
    GraspPose {
        pose: scene.arm.forward_kinematics(q).unwrap().ee,
        params: GraspParams::disc(0.0, 0.04),
        target_id: scene.target_id(),
    }
}

#[test]
fn refinement_from_a_feasible_solution_descends() {
    let scene = open_scene(vec![]);
    let params = PlannerParams {
        n_0: 12,
        ..PlannerParams::default()
    };
    let goal_q = JointConfig::new(vec![0.8, 0.3, -0.2, 0.1, 0.0]);
    let solution = linear_init(&scene.start, &goal_q, 12);
    let grasp = grasp_on(&scene, &goal_q);
    let optimizer = TrajectoryOptimizer::new(&scene.arm, &scene.obstacles);
    let state = PlannerState::new(scene.start.clone(), &params);
    let r = refine(&optimizer, &state, &solution, &grasp, &params);
    assert!(r.init_feasible);
    assert_eq!(r.init, solution);
    assert!(r.result.success);
    assert!(r.result.cost <= trajectory_cost(&solution, None).unwrap() + 1e-9);
}

#[test]
fn refinement_resamples_with_exact_endpoints() {
    let scene = open_scene(vec![]);
    let params = PlannerParams {
        n_0: 12,
        ..PlannerParams::default()
    };
    let mut state = PlannerState::new(scene.start.clone(), &params);
    // 4 committed plus a 9-waypoint horizon gives 13, one more than n_0
    state.committed = (1..=4)
        .map(|i| JointConfig::new(vec![0.05 * i as f64, 0.0, 0.0, 0.0, 0.0]))
        .collect();
    state.q0 = state.committed[3].clone();
    let goal_q = JointConfig::new(vec![0.9, 0.2, -0.1, 0.1, 0.03]);
    let solution = linear_init(&state.q0, &goal_q, 9);
    let grasp = grasp_on(&scene, &goal_q);
    let optimizer = TrajectoryOptimizer::new(&scene.arm, &scene.obstacles);
    let r = refine(&optimizer, &state, &solution, &grasp, &params);
    assert_eq!(r.init.len(), params.n_0);
    assert_eq!(r.init.first(), &scene.start);
    assert_eq!(r.init.last(), solution.last());
}

#[test]
fn refinement_repairs_a_slightly_colliding_concatenation() {
    // straight arm sweeping from 0.3 to 0.9 rad; a post clips its tip by 5 mm
    let reach = ArmModel::default().reach();
    let dir = Point::new(0.6f64.cos(), 0.6f64.sin());
    let post = Obstacle::disc(dir * (reach + 0.02 + 0.05 - 0.005), 0.05);
    let scene = open_scene(vec![post]);
    let params = PlannerParams::default().with_mu_max(0.001);
    let start = JointConfig::new(vec![0.3, 0.0, 0.0, 0.0, 0.0]);
    let goal_q = JointConfig::new(vec![0.9, 0.0, 0.0, 0.0, 0.0]);
    let solution = linear_init(&start, &goal_q, params.n_0);
    let grasp = grasp_on(&scene, &goal_q);
    let optimizer = TrajectoryOptimizer::new(&scene.arm, &scene.obstacles);
    let state = PlannerState::new(start, &params);
    let r = refine(&optimizer, &state, &solution, &grasp, &params);
    assert!(!r.init_feasible);
    assert!(r.result.success, "{:?}", r.result.violations);
    assert!(r.result.max_violation <= params.mu_max);
}
