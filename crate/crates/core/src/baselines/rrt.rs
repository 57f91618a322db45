//! Bidirectional RRT-Connect in joint space.

use std::time::Instant;

use kiddo::{KdTree, SquaredEuclidean};
use rand::Rng;

use crate::collision::{config_collides, interpolation_steps, trajectory_clearance, Obstacle};
use crate::grasp::sample_grasp;
use crate::harness::Scene;
use crate::kinematics::{ArmModel, IkOptions, JointConfig};
use crate::optimizer::{trajectory_cost_weighted, Trajectory};
use crate::planner::{Candidate, PlanOutcome, PlanStats, PlannerParams, SolveRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct RrtParams {
    /// Longest tree edge, radians (max-norm).
    pub step: f64,
    pub max_nodes: usize,
    pub ik_seeds: usize,
    pub ik: IkOptions,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_nodes: 20_000,
            ik_seeds: 20,
            ik: IkOptions::default(),
        }
    }
}

fn random_config<R: Rng + ?Sized>(arm: &ArmModel, rng: &mut R) -> JointConfig {
    JointConfig::new(
        arm.joint_lower()
            .iter()
            .zip(arm.joint_upper())
            .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
            .collect(),
    )
}

fn config_free(arm: &ArmModel, q: &JointConfig, obstacles: &[Obstacle]) -> bool {
    !config_collides(arm, q, obstacles, true)
}

/// Collision check of the straight edge `a -> b`, excluding `a`.
fn edge_free(
    arm: &ArmModel,
    a: &JointConfig,
    b: &JointConfig,
    obstacles: &[Obstacle],
    resolution: f64,
) -> bool {
    let steps = interpolation_steps(a, b, resolution);
    (1..=steps).all(|k| config_free(arm, &a.lerp(b, k as f64 / steps as f64), obstacles))
}

/// Goal configuration for the grasp pose: IK from uniformly random seeds,
/// keeping the first collision-free solution.
pub fn goal_config<R: Rng + ?Sized>(
    arm: &ArmModel,
    obstacles: &[Obstacle],
    target: &crate::kinematics::PlanarPose,
    params: &RrtParams,
    rng: &mut R,
) -> Option<JointConfig> {
    for _ in 0..params.ik_seeds {
        let seed = random_config(arm, rng);
        if let Ok(q) = arm.ik_solve(target, &seed, &params.ik) {
            if config_free(arm, &q, obstacles) {
                return Some(q);
            }
        }
    }
    None
}

struct Tree {
    nodes: Vec<JointConfig>,
    parent: Vec<usize>,
    index: NearIndex,
}

/// Nearest-neighbour index. The default 5-joint arm gets a k-d tree; other
/// arms fall back to a linear scan over packed coordinates.
enum NearIndex {
    Five(KdTree<f64, 5>),
    Flat(Vec<f64>),
}

impl NearIndex {
    fn new(dof: usize) -> Self {
        if dof == 5 {
            Self::Five(KdTree::new())
        } else {
            Self::Flat(Vec::new())
        }
    }

    fn add(&mut self, q: &JointConfig, idx: usize) {
        match self {
            Self::Five(t) => {
                let p: [f64; 5] = std::array::from_fn(|i| q[i]);
                t.add(&p, idx as u64);
            }
            Self::Flat(v) => v.extend(q.iter()),
        }
    }

    fn nearest(&self, q: &JointConfig) -> usize {
        match self {
            Self::Five(t) => {
                let p: [f64; 5] = std::array::from_fn(|i| q[i]);
                t.nearest_one::<SquaredEuclidean>(&p).item as usize
            }
            Self::Flat(v) => {
                let mut best = (0, f64::INFINITY);
                for (i, row) in v.chunks_exact(q.len()).enumerate() {
                    let d: f64 = row.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best.0
            }
        }
    }
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

impl Tree {
    fn new(root: JointConfig) -> Self {
        let mut tree = Self {
            nodes: vec![],
            parent: vec![],
            index: NearIndex::new(root.len()),
        };
        tree.push(root, usize::MAX);
        tree
    }

    fn push(&mut self, q: JointConfig, parent: usize) -> usize {
        let idx = self.nodes.len();
        self.index.add(&q, idx);
        self.nodes.push(q);
        self.parent.push(parent);
        idx
    }

    fn nearest(&self, q: &JointConfig) -> usize {
        self.index.nearest(q)
    }

    /// Root-to-node path.
    fn path_to(&self, mut i: usize) -> Vec<JointConfig> {
        let mut out = vec![];
        while i != usize::MAX {
            out.push(self.nodes[i].clone());
            i = self.parent[i];
        }
        out.reverse();
        out
    }
}

struct Connector<'a> {
    arm: &'a ArmModel,
    obstacles: &'a [Obstacle],
    step: f64,
    resolution: f64,
}

impl Connector<'_> {
    fn extend(&self, tree: &mut Tree, target: &JointConfig) -> Extend {
        let near = tree.nearest(target);
        let q_near = &tree.nodes[near];
        let span = q_near.max_abs_diff(target);
        let (q_new, reached) = if span <= self.step {
            (target.clone(), true)
        } else {
            (q_near.lerp(target, self.step / span), false)
        };
        if !edge_free(self.arm, q_near, &q_new, self.obstacles, self.resolution) {
            return Extend::Trapped;
        }
        let idx = tree.push(q_new, near);
        if reached {
            Extend::Reached(idx)
        } else {
            Extend::Advanced(idx)
        }
    }

    fn connect(&self, tree: &mut Tree, target: &JointConfig, budget: usize) -> Extend {
        let mut last = Extend::Trapped;
        while tree.nodes.len() < budget {
            match self.extend(tree, target) {
                Extend::Advanced(i) => last = Extend::Advanced(i),
                other => return other,
            }
        }
        last
    }
}

/// Joint-space path from `start` to `goal`, or `None` once the two trees
/// hold `max_nodes` nodes together. Also returns the node count.
pub fn rrt_connect<R: Rng + ?Sized>(
    arm: &ArmModel,
    obstacles: &[Obstacle],
    start: &JointConfig,
    goal: &JointConfig,
    params: &RrtParams,
    rng: &mut R,
) -> (Option<Vec<JointConfig>>, usize) {
    assert!(params.step > 0.0, "RRT step must be positive");
    let conn = Connector {
        arm,
        obstacles,
        step: params.step,
        resolution: params.step / 5.0,
    };
    if start == goal {
        return (Some(vec![start.clone()]), 1);
    }
    let mut a = Tree::new(start.clone());
    let mut b = Tree::new(goal.clone());
    // `a` grows from the start whenever this is false
    let mut swapped = false;
    loop {
        let total = a.nodes.len() + b.nodes.len();
        if total >= params.max_nodes {
            return (None, total);
        }
        let q_rand = random_config(arm, rng);
        let new = match conn.extend(&mut a, &q_rand) {
            Extend::Trapped => None,
            Extend::Advanced(i) | Extend::Reached(i) => Some(i),
        };
        if let Some(i) = new {
            let q_new = a.nodes[i].clone();
            let budget = params.max_nodes - a.nodes.len();
            if let Extend::Reached(j) = conn.connect(&mut b, &q_new, budget) {
                let mut path = a.path_to(i);
                let mut tail = b.path_to(j);
                tail.reverse();
                path.extend(tail.into_iter().skip(1));
                if swapped {
                    path.reverse();
                }
                return (Some(path), a.nodes.len() + b.nodes.len());
            }
        }
        std::mem::swap(&mut a, &mut b);
        swapped = !swapped;
    }
}

/// Samples one grasp and connects the start to an IK solution for it. The
/// raw path is resampled to `n_0` waypoints and costed without smoothing.
pub fn rrt_connect_plan<R: Rng + ?Sized>(
    scene: &Scene,
    params: &PlannerParams,
    rrt: &RrtParams,
    rng: &mut R,
) -> PlanOutcome {
    let clock = Instant::now();
    let arm = &scene.arm;
    let mut stats = PlanStats {
        iterations: 1,
        ..PlanStats::default()
    };
    let finish = |mut stats: PlanStats, c: Option<Candidate>| {
        stats.wall_time = clock.elapsed().as_secs_f64();
        stats.solves.push(SolveRecord {
            horizon: params.n_0,
            wall_time: stats.wall_time,
            success: c.is_some(),
            refinement: false,
        });
        match c {
            Some(c) => PlanOutcome::from_candidate(c, stats),
            None => PlanOutcome::failure(stats),
        }
    };
    let grasp = sample_grasp(scene.target(), scene.target_id(), &scene.grasp, rng);
    let (pos_err, rot_err) = arm.fk_unchecked(&scene.start).ee.error_to(&grasp.pose);
    let goal = if pos_err <= rrt.ik.tol && rot_err.abs() <= rrt.ik.tol {
        scene.start.clone()
    } else {
        match goal_config(arm, &scene.obstacles, &grasp.pose, rrt, rng) {
            Some(q) => q,
            None => return finish(stats, None),
        }
    };
    let (path, nodes) = rrt_connect(arm, &scene.obstacles, &scene.start, &goal, rrt, rng);
    stats.iterations = nodes;
    let Some(mut path) = path else {
        return finish(stats, None);
    };
    if path.len() < 2 {
        path.push(path[0].clone());
    }
    let traj = Trajectory::new(path)
        .expect("tree nodes share the arm dimension")
        .resample(params.n_0);
    let clearance = trajectory_clearance(
        arm,
        &traj,
        &scene.obstacles,
        params.solver.dense_resolution,
        true,
    );
    if clearance.min_distance < -params.mu_max {
        // resampling cut a corner through an obstacle
        return finish(stats, None);
    }
    let cost = trajectory_cost_weighted(&traj, None, &params.solver.weights)
        .expect("resampled path is long enough");
    finish(
        stats,
        Some(Candidate {
            trajectory: traj,
            cost,
            grasp,
        }),
    )
}
