//! Seeded trial runner.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{
    fixed_goal_plan, rrt_connect_plan, variable_multi_plan, variable_single_plan, MethodId,
    RrtParams,
};
use crate::planner::{plan, PlanOutcome, PlanStats, PlannerParams};

use super::Scene;

/// Caps the worker pool used by [`run_bench`].
pub const WORKERS_ENV: &str = "GRASPCOMMIT_WORKERS";

/// Parameters shared by every method in a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub planner: PlannerParams,
    pub rrt: RrtParams,
    /// Attempts made by `variable_multi`.
    pub multi_attempts: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            rrt: RrtParams::default(),
            multi_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scene: String,
    pub method: MethodId,
    pub seed: u64,
    pub success: bool,
    /// Present iff `success`.
    pub cost: Option<f64>,
    pub wall_time: f64,
    pub iterations: usize,
    pub commitments: usize,
    /// The full outcome, kept for audits.
    pub outcome: PlanOutcome,
}

/// Runs one method once on `scene` with an rng seeded from `seed`.
pub fn run_method(
    scene: &Scene,
    method: MethodId,
    seed: u64,
    config: &MethodConfig,
) -> PlanOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = &config.planner;
    match method {
        MethodId::RrtConnect => rrt_connect_plan(scene, params, &config.rrt, &mut rng),
        MethodId::FixedGoal => fixed_goal_plan(scene, params)
            .unwrap_or_else(|_| PlanOutcome::failure(PlanStats::default())),
        MethodId::VariableSingle => variable_single_plan(scene, params, &mut rng),
        MethodId::VariableMulti => {
            variable_multi_plan(scene, params, &mut rng, config.multi_attempts)
        }
        MethodId::Ours => plan(scene, params, &mut rng)
            .unwrap_or_else(|_| PlanOutcome::failure(PlanStats::default())),
    }
}

fn trial(scene: &Scene, method: MethodId, seed: u64, config: &MethodConfig) -> TrialRecord {
    let clock = Instant::now();
    let outcome = run_method(scene, method, seed, config);
    let wall_time = clock.elapsed().as_secs_f64();
    TrialRecord {
        scene: scene.name.clone(),
        method,
        seed,
        success: outcome.success,
        cost: outcome.cost,
        wall_time,
        iterations: outcome.stats.iterations,
        commitments: outcome.stats.commits,
        outcome,
    }
}

/// Trial `i` uses seed `base_seed + i`.
pub fn run_trials(
    scene: &Scene,
    method: MethodId,
    n_trials: usize,
    base_seed: u64,
    config: &MethodConfig,
) -> Vec<TrialRecord> {
    assert!(n_trials >= 1, "need at least one trial");
    (0..n_trials as u64)
        .map(|i| trial(scene, method, base_seed.wrapping_add(i), config))
        .collect()
}

/// Worker count: the pool default, capped by [`WORKERS_ENV`] when set.
pub fn worker_count() -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .map_or(default, |n| n.min(default))
}

/// Every (scene, method, seed) trial, run on a worker pool and returned
/// sorted by scene name, method and seed.
pub fn run_bench(
    scenes: &[Scene],
    methods: &[MethodId],
    n_trials: usize,
    base_seed: u64,
    config: &MethodConfig,
) -> Vec<TrialRecord> {
    assert!(n_trials >= 1, "need at least one trial");
    let jobs: Vec<(&Scene, MethodId, u64)> = scenes
        .iter()
        .flat_map(|s| {
            methods.iter().flat_map(move |&m| {
                (0..n_trials as u64).map(move |i| (s, m, base_seed.wrapping_add(i)))
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .expect("thread pool");
    let mut records: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(scene, method, seed)| trial(scene, method, seed, config))
            .collect()
    });
    records.sort_by(|a, b| (&a.scene, a.method, a.seed).cmp(&(&b.scene, b.method, b.seed)));
    records
}
