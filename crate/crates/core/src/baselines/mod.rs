//! Comparison methods sharing the scene, arm, cost and grasp sampler.

mod rrt;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use rrt::{goal_config, rrt_connect, rrt_connect_plan, RrtParams};

use crate::grasp::{sample_grasp, GraspPose};
use crate::harness::{Scene, SceneError};
use crate::optimizer::{linear_init_to_pose, SolveQuery, TrajectoryOptimizer};
use crate::planner::{Candidate, PlanOutcome, PlanStats, PlannerParams, SolveRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    RrtConnect,
    FixedGoal,
    VariableSingle,
    VariableMulti,
    Ours,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::RrtConnect,
        MethodId::FixedGoal,
        MethodId::VariableSingle,
        MethodId::VariableMulti,
        MethodId::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::RrtConnect => "rrt_connect",
            MethodId::FixedGoal => "fixed_goal",
            MethodId::VariableSingle => "variable_single",
            MethodId::VariableMulti => "variable_multi",
            MethodId::Ours => "ours",
        }
    }

    /// Whether the method draws random numbers.
    pub fn is_random(self) -> bool {
        self != MethodId::FixedGoal
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MethodId::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method {s:?}, expected one of {}", names.join(", "))
            })
    }
}

/// One optimizer solve from the scene start toward `grasp` over `n_0`
/// waypoints at tolerance `mu_max`.
fn solve_toward(
    optimizer: &TrajectoryOptimizer,
    scene: &Scene,
    grasp: GraspPose,
    params: &PlannerParams,
    stats: &mut PlanStats,
) -> Option<Candidate> {
    let init = linear_init_to_pose(&scene.arm, &scene.start, &grasp.pose, params.n_0);
    let query = SolveQuery::new(scene.start.clone(), grasp.pose, init, params.mu_max);
    let result = optimizer
        .solve(&query)
        .expect("baseline queries are well formed");
    stats.iterations += 1;
    stats.solves.push(SolveRecord {
        horizon: params.n_0,
        wall_time: result.wall_time,
        success: result.success,
        refinement: false,
    });
    result.success.then(|| Candidate {
        trajectory: result.trajectory,
        cost: result.cost,
        grasp,
    })
}

/// One solve toward the scene's hand-chosen grasp.
pub fn fixed_goal_plan(scene: &Scene, params: &PlannerParams) -> Result<PlanOutcome, SceneError> {
    let clock = Instant::now();
    let grasp = scene.fixed_grasp()?;
    let optimizer =
        TrajectoryOptimizer::new(&scene.arm, &scene.obstacles).with_config(params.solver.clone());
    let mut stats = PlanStats::default();
    let best = solve_toward(&optimizer, scene, grasp, params, &mut stats);
    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok(match best {
        Some(c) => PlanOutcome::from_candidate(c, stats),
        None => PlanOutcome::failure(stats),
    })
}

/// `k` independent solves toward sampled grasps; the cheapest success wins,
/// ties going to the earliest attempt.
pub fn variable_multi_plan<R: Rng + ?Sized>(
    scene: &Scene,
    params: &PlannerParams,
    rng: &mut R,
    k: usize,
) -> PlanOutcome {
    assert!(k >= 1, "need at least one attempt");
    let clock = Instant::now();
    let optimizer =
        TrajectoryOptimizer::new(&scene.arm, &scene.obstacles).with_config(params.solver.clone());
    let mut stats = PlanStats::default();
    let mut best: Option<Candidate> = None;
    for _ in 0..k {
        let grasp = sample_grasp(scene.target(), scene.target_id(), &scene.grasp, rng);
        if let Some(c) = solve_toward(&optimizer, scene, grasp, params, &mut stats) {
            if best.as_ref().map_or(true, |b| c.cost < b.cost) {
                best = Some(c);
            }
        }
    }
    stats.wall_time = clock.elapsed().as_secs_f64();
    match best {
        Some(c) => PlanOutcome::from_candidate(c, stats),
        None => PlanOutcome::failure(stats),
    }
}

/// One solve toward one sampled grasp.
pub fn variable_single_plan<R: Rng + ?Sized>(
    scene: &Scene,
    params: &PlannerParams,
    rng: &mut R,
) -> PlanOutcome {
    variable_multi_plan(scene, params, rng, 1)
}
