//! Outer planning loop around the trajectory optimizer.
//!
//! Every iteration samples a grasp and solves over the current horizon at the
//! current tolerance `mu`. After `s_thres` successes the cheapest of them
//! donates a prefix of waypoints to the committed list, which shortens the
//! horizon, tightens `mu` and raises `s_thres`. Once `mu` reaches `mu_max`
//! every success is refined over the full horizon and becomes a candidate;
//! the cheapest candidate is returned.

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::grasp::{sample_grasp, GraspPose};
use crate::harness::Scene;
use crate::kinematics::JointConfig;
use crate::optimizer::{
    linear_init_to_pose, trajectory_cost_weighted, SolveQuery, SolveResult, SolverConfig,
    Trajectory, TrajectoryOptimizer,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error("commitment step needs s = s_thres and a non-empty temporary list")]
    CommitmentPrecondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub mu_max: f64,
    pub mu_0: f64,
    pub max_iters: usize,
    /// Waypoints of the full trajectory.
    pub n_0: usize,
    /// Fraction of the horizon committed per commitment step.
    pub commit_fraction: f64,
    /// Largest committed list, as a fraction of `n_0`.
    pub commit_cap: f64,
    pub mu_decay: f64,
    pub solver: SolverConfig,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            mu_max: 0.01,
            mu_0: 1.0,
            max_iters: 40,
            n_0: 30,
            commit_fraction: 0.25,
            commit_cap: 0.5,
            mu_decay: 10f64.powf(-0.4),
            solver: SolverConfig::default(),
        }
    }
}

impl PlannerParams {
    /// Sets `mu_max` and `mu_0 = 100 * mu_max`.
    pub fn with_mu_max(mut self, mu_max: f64) -> Self {
        self.mu_max = mu_max;
        self.mu_0 = 100.0 * mu_max;
        self
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: String| Err(PlannerError::InvalidParams(m));
        if !(self.mu_max > 0.0 && self.mu_0 >= self.mu_max) {
            return bad(format!(
                "need mu_0 >= mu_max > 0, got mu_0 {} and mu_max {}",
                self.mu_0, self.mu_max
            ));
        }
        if !(self.commit_fraction > 0.0 && self.commit_fraction < 1.0) {
            return bad(format!(
                "commit fraction {} outside (0, 1)",
                self.commit_fraction
            ));
        }
        if !(self.commit_cap > 0.0 && self.commit_cap < 1.0) {
            return bad(format!("commit cap {} outside (0, 1)", self.commit_cap));
        }
        if !(self.mu_decay > 0.0 && self.mu_decay < 1.0) {
            return bad(format!("mu decay {} outside (0, 1)", self.mu_decay));
        }
        if self.n_0 < 3 || self.max_committed() + 2 > self.n_0 {
            return bad(format!(
                "n_0 = {} leaves no horizon of at least 2 waypoints under the commit cap",
                self.n_0
            ));
        }
        Ok(())
    }

    /// Upper bound on the committed list length.
    pub fn max_committed(&self) -> usize {
        (self.commit_cap * self.n_0 as f64 + 1e-9).floor() as usize
    }
}

/// A successful trajectory with its grasp and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub grasp: GraspPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    /// The original start `q_s`.
    pub start: JointConfig,
    /// Start of the current horizon.
    pub q0: JointConfig,
    pub mu: f64,
    /// Horizon waypoint count, including `q0`.
    pub n: usize,
    pub committed: Vec<JointConfig>,
    pub s: usize,
    pub s_thres: usize,
    pub temp: Vec<Candidate>,
    pub candidates: Vec<Candidate>,
}

impl PlannerState {
    pub fn new(start: JointConfig, params: &PlannerParams) -> Self {
        Self {
            q0: start.clone(),
            start,
            mu: params.mu_0,
            n: params.n_0,
            committed: Vec::new(),
            s: 0,
            s_thres: 1,
            temp: Vec::new(),
            candidates: Vec::new(),
        }
    }

    /// Up to two waypoints preceding `q0` in `[q_s] ++ C`.
    pub fn seam_prefix(&self) -> Vec<JointConfig> {
        let full: Vec<&JointConfig> = std::iter::once(&self.start)
            .chain(&self.committed)
            .collect();
        let end = full.len() - 1;
        full[end.saturating_sub(2)..end]
            .iter()
            .map(|q| (*q).clone())
            .collect()
    }
}

/// Cheapest entry, ties going to the earliest.
fn argmin(list: &[Candidate]) -> Option<&Candidate> {
    list.iter()
        .fold(None, |best: Option<&Candidate>, c| match best {
            Some(b) if b.cost <= c.cost => Some(b),
            _ => Some(c),
        })
}

/// Commits a prefix of the cheapest temporary trajectory and advances the
/// schedule. Returns the number of waypoints committed, which is zero when
/// the cap blocks the commitment.
pub fn commitment_step(
    state: &mut PlannerState,
    params: &PlannerParams,
) -> Result<usize, PlannerError> {
    if state.s != state.s_thres || state.temp.is_empty() {
        return Err(PlannerError::CommitmentPrecondition);
    }
    let best = argmin(&state.temp).expect("temp is non-empty");
    let k = ((params.commit_fraction * state.n as f64).round() as usize)
        .max(1)
        .min(state.n - 1);
    let committed = if state.committed.len() + k <= params.max_committed() {
        let wps = best.trajectory.waypoints();
        state.committed.extend_from_slice(&wps[1..=k]);
        state.q0 = state.committed.last().expect("just committed").clone();
        state.n = params.n_0 - state.committed.len();
        k
    } else {
        0
    };
    let next = params.mu_decay * state.mu;
    // snap so that the floor is hit exactly despite rounding in the decay
    state.mu = if next <= params.mu_max * (1.0 + 1e-9) {
        params.mu_max
    } else {
        next
    };
    state.s_thres += 1;
    state.s = 0;
    state.temp.clear();
    Ok(committed)
}

/// Result of one refinement call.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    /// `[q_s] ++ C ++ solution[1..]`, resampled to `n_0` waypoints if needed.
    pub init: Trajectory,
    pub init_cost: f64,
    /// Whether `init` already meets every constraint at `mu_max`.
    pub init_feasible: bool,
    pub result: SolveResult,
}

impl Refinement {
    pub fn candidate(&self, grasp: GraspPose) -> Option<Candidate> {
        self.result.success.then(|| Candidate {
            trajectory: self.result.trajectory.clone(),
            cost: self.result.cost,
            grasp,
        })
    }
}

/// Re-optimizes the committed waypoints plus `solution` over the full
/// horizon from `q_s`.
pub fn refine(
    optimizer: &TrajectoryOptimizer,
    state: &PlannerState,
    solution: &Trajectory,
    grasp: &GraspPose,
    params: &PlannerParams,
) -> Refinement {
    let mut wps: Vec<JointConfig> = Vec::with_capacity(params.n_0);
    wps.push(state.start.clone());
    wps.extend(state.committed.iter().cloned());
    wps.extend(solution.waypoints()[1..].iter().cloned());
    let mut init = Trajectory::new(wps).expect("waypoints share the arm dimension");
    if init.len() != params.n_0 {
        init = init.resample(params.n_0);
    }
    let query = SolveQuery::new(state.start.clone(), grasp.pose, init.clone(), params.mu_max);
    let init_cost = trajectory_cost_weighted(&init, None, &optimizer.config.weights)
        .expect("at least two waypoints");
    let init_feasible = optimizer.violations(&query, &init).max() <= params.mu_max;
    let result = optimizer
        .solve(&query)
        .expect("refinement queries are well formed");
    Refinement {
        init,
        init_cost,
        init_feasible,
        result,
    }
}

/// Per-iteration snapshot taken after the iteration's updates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub committed: usize,
    pub n: usize,
    pub mu: f64,
    pub s: usize,
    pub s_thres: usize,
    pub inner_success: bool,
    /// `Some(k)` when a commitment step ran, with `k` waypoints committed.
    pub commitment: Option<usize>,
    /// `Some(success)` when a refinement ran.
    pub refinement: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRecord {
    pub horizon: usize,
    pub wall_time: f64,
    pub success: bool,
    pub refinement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRecord {
    pub init_cost: f64,
    pub init_feasible: bool,
    pub success: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub iterations: usize,
    pub commitment_steps: usize,
    /// Commitment steps that committed waypoints.
    pub commits: usize,
    pub refinements: usize,
    pub solves: Vec<SolveRecord>,
    pub refinement_log: Vec<RefinementRecord>,
    pub trace: Vec<IterationTrace>,
    pub wall_time: f64,
}

impl PlanStats {
    pub fn solve_time(&self) -> f64 {
        self.solves.iter().map(|s| s.wall_time).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub success: bool,
    pub trajectory: Option<Trajectory>,
    pub grasp: Option<GraspPose>,
    pub cost: Option<f64>,
    pub stats: PlanStats,
}

impl PlanOutcome {
    pub fn failure(stats: PlanStats) -> Self {
        Self {
            success: false,
            trajectory: None,
            grasp: None,
            cost: None,
            stats,
        }
    }

    pub fn from_candidate(c: Candidate, stats: PlanStats) -> Self {
        Self {
            success: true,
            trajectory: Some(c.trajectory),
            grasp: Some(c.grasp),
            cost: Some(c.cost),
            stats,
        }
    }
}

/// Runs `params.max_iters` outer iterations on `scene`.
pub fn plan<R: Rng + ?Sized>(
    scene: &Scene,
    params: &PlannerParams,
    rng: &mut R,
) -> Result<PlanOutcome, PlannerError> {
    params.validate()?;
    let clock = Instant::now();
    let arm = &scene.arm;
    let optimizer =
        TrajectoryOptimizer::new(arm, &scene.obstacles).with_config(params.solver.clone());
    let mut state = PlannerState::new(scene.start.clone(), params);
    let mut stats = PlanStats::default();

    for _ in 0..params.max_iters {
        stats.iterations += 1;
        let grasp = sample_grasp(scene.target(), scene.target_id(), &scene.grasp, rng);
        let init = linear_init_to_pose(arm, &state.q0, &grasp.pose, state.n);
        // At relaxed tolerances a feasible linear init may still cut through
        // obstacles; committing from it would strand q0 in collision.
        let query = SolveQuery::new(state.q0.clone(), grasp.pose, init, state.mu)
            .with_prefix(state.seam_prefix())
            .without_init_fallback();
        let result = optimizer
            .solve(&query)
            .expect("planner queries are well formed");
        stats.solves.push(SolveRecord {
            horizon: state.n,
            wall_time: result.wall_time,
            success: result.success,
            refinement: false,
        });
        let mut trace_commit = None;
        let mut trace_refine = None;
        if result.success {
            state.temp.push(Candidate {
                trajectory: result.trajectory.clone(),
                cost: result.cost,
                grasp,
            });
            state.s += 1;
            if state.mu <= params.mu_max {
                let refined = refine(&optimizer, &state, &result.trajectory, &grasp, params);
                stats.refinements += 1;
                stats.solves.push(SolveRecord {
                    horizon: params.n_0,
                    wall_time: refined.result.wall_time,
                    success: refined.result.success,
                    refinement: true,
                });
                let candidate = refined.candidate(grasp);
                stats.refinement_log.push(RefinementRecord {
                    init_cost: refined.init_cost,
                    init_feasible: refined.init_feasible,
                    success: candidate.is_some(),
                    cost: candidate.as_ref().map_or(refined.result.cost, |c| c.cost),
                });
                trace_refine = Some(candidate.is_some());
                state.candidates.extend(candidate);
            }
            if state.s == state.s_thres {
                let k = commitment_step(&mut state, params)?;
                stats.commitment_steps += 1;
                if k > 0 {
                    stats.commits += 1;
                }
                trace_commit = Some(k);
            }
        }
        stats.trace.push(IterationTrace {
            committed: state.committed.len(),
            n: state.n,
            mu: state.mu,
            s: state.s,
            s_thres: state.s_thres,
            inner_success: result.success,
            commitment: trace_commit,
            refinement: trace_refine,
        });
    }

    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok(match argmin(&state.candidates) {
        Some(best) => PlanOutcome::from_candidate(best.clone(), stats),
        None => PlanOutcome::failure(stats),
    })
}
