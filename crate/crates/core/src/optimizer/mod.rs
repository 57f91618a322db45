//! Penalty-SQP trajectory optimizer.
//!
//! A query fixes the start configuration, a task-space goal pose, an initial
//! trajectory, a constraint tolerance and the number of waypoints. The
//! optimizer minimizes the smoothness cost subject to reaching the goal,
//! staying clear of obstacles and within joint limits. Constraints enter as
//! exact l1 penalties whose common multiplier grows tenfold whenever an SQP
//! phase converges with violations above the tolerance.

mod banded;
mod cost;
mod objective;
mod subproblem;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::CostWeights;
pub use objective::{PenalizedObjective, Violations};

use crate::collision::Obstacle;
use crate::kinematics::{ArmModel, IkOptions, JointConfig, PlanarPose};
use subproblem::{IpmSettings, StepProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("trajectory needs at least {needed} waypoints, got {got}")]
    TooFewWaypoints { needed: usize, got: usize },
    #[error("waypoint {index} has {got} joints, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

/// Ordered joint-space waypoints of equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<JointConfig>", into = "Vec<JointConfig>")]
pub struct Trajectory {
    waypoints: Vec<JointConfig>,
}

impl TryFrom<Vec<JointConfig>> for Trajectory {
    type Error = OptimizerError;
    fn try_from(v: Vec<JointConfig>) -> Result<Self, Self::Error> {
        Trajectory::new(v)
    }
}

impl From<Trajectory> for Vec<JointConfig> {
    fn from(t: Trajectory) -> Self {
        t.waypoints
    }
}

impl Trajectory {
    pub fn new(waypoints: Vec<JointConfig>) -> Result<Self, OptimizerError> {
        let Some(first) = waypoints.first() else {
            return Err(OptimizerError::TooFewWaypoints { needed: 1, got: 0 });
        };
        let dof = first.dof();
        if let Some((index, q)) = waypoints.iter().enumerate().find(|(_, q)| q.dof() != dof) {
            return Err(OptimizerError::DimensionMismatch {
                index,
                expected: dof,
                got: q.dof(),
            });
        }
        Ok(Self { waypoints })
    }

    pub(crate) fn from_waypoints_unchecked(waypoints: Vec<JointConfig>) -> Self {
        Self { waypoints }
    }

    pub fn constant(q: &JointConfig, n: usize) -> Self {
        Self {
            waypoints: vec![q.clone(); n.max(1)],
        }
    }

    pub fn waypoints(&self) -> &[JointConfig] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.waypoints[0].dof()
    }

    pub fn first(&self) -> &JointConfig {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &JointConfig {
        self.waypoints.last().expect("trajectory is never empty")
    }

    pub fn into_waypoints(self) -> Vec<JointConfig> {
        self.waypoints
    }

    /// Joint-space polyline length.
    pub fn path_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].distance(&w[1]))
            .sum()
    }

    /// Resamples to `n` waypoints equally spaced along cumulative joint-space
    /// arc length. The endpoints are kept bitwise.
    pub fn resample(&self, n: usize) -> Trajectory {
        assert!(n >= 2, "resampling needs at least 2 waypoints");
        let first = self.first().clone();
        let last = self.last().clone();
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in self.waypoints.windows(2) {
            acc += w[0].distance(&w[1]);
            cumulative.push(acc);
        }
        let total = acc;
        let mut out = Vec::with_capacity(n);
        out.push(first.clone());
        let mut seg = 0;
        for k in 1..n - 1 {
            if total == 0.0 {
                out.push(first.clone());
                continue;
            }
            let s = total * k as f64 / (n - 1) as f64;
            while seg + 1 < self.len() - 1 && cumulative[seg + 1] < s {
                seg += 1;
            }
            let span = cumulative[seg + 1] - cumulative[seg];
            let t = if span > 0.0 {
                ((s - cumulative[seg]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            out.push(self.waypoints[seg].lerp(&self.waypoints[seg + 1], t));
        }
        out.push(last);
        Trajectory { waypoints: out }
    }
}

/// Smoothness cost of `prefix ++ traj` with unit weights.
pub fn trajectory_cost(
    traj: &Trajectory,
    prefix: Option<&[JointConfig]>,
) -> Result<f64, OptimizerError> {
    trajectory_cost_weighted(traj, prefix, &CostWeights::default())
}

pub fn trajectory_cost_weighted(
    traj: &Trajectory,
    prefix: Option<&[JointConfig]>,
    weights: &CostWeights,
) -> Result<f64, OptimizerError> {
    if traj.len() < 2 {
        return Err(OptimizerError::TooFewWaypoints {
            needed: 2,
            got: traj.len(),
        });
    }
    let prefix = prefix.unwrap_or(&[]);
    if let Some((index, q)) = prefix
        .iter()
        .enumerate()
        .find(|(_, q)| q.dof() != traj.dof())
    {
        return Err(OptimizerError::DimensionMismatch {
            index,
            expected: traj.dof(),
            got: q.dof(),
        });
    }
    Ok(cost::sequence_cost(prefix, traj.waypoints(), weights))
}

/// `n` waypoints evenly interpolating `start -> goal_config`.
pub fn linear_init(start: &JointConfig, goal_config: &JointConfig, n: usize) -> Trajectory {
    assert!(n >= 2, "a trajectory needs at least 2 waypoints");
    let waypoints = (0..n)
        .map(|i| start.lerp(goal_config, i as f64 / (n - 1) as f64))
        .collect();
    Trajectory { waypoints }
}

/// Linear initialization toward a task-space goal. The goal configuration
/// comes from IK seeded at `start`; if IK fails the result is `n` copies of
/// `start`.
pub fn linear_init_to_pose(
    arm: &ArmModel,
    start: &JointConfig,
    goal: &PlanarPose,
    n: usize,
) -> Trajectory {
    match arm.ik_solve(goal, start, &IkOptions::default()) {
        Ok(goal_config) => linear_init(start, &goal_config, n),
        Err(_) => Trajectory::constant(start, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub weights: CostWeights,
    /// Required clearance beyond the link radius, meters.
    pub collision_margin: f64,
    /// Pairs closer than `margin + buffer` are linearized.
    pub collision_buffer: f64,
    /// Extra collision samples between consecutive waypoints.
    pub collision_substeps: usize,
    /// Joint-space resolution of the continuous collision check that decides
    /// feasibility, radians.
    pub dense_resolution: f64,
    /// Keep the links clear of the grasp target too.
    pub avoid_target: bool,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty_phases: usize,
    pub max_sqp_iters: usize,
    pub trust_init: f64,
    pub trust_expand: f64,
    pub trust_shrink: f64,
    pub trust_min: f64,
    pub trust_max: f64,
    /// Minimum actual/predicted merit improvement ratio to accept a step.
    pub accept_ratio: f64,
    pub min_model_improve: f64,
    pub min_model_improve_frac: f64,
    /// Interior-point iteration cap of each convex subproblem.
    pub qp_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            collision_margin: 0.0,
            collision_buffer: 0.05,
            collision_substeps: 3,
            dense_resolution: 0.005,
            avoid_target: true,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty_phases: 5,
            max_sqp_iters: 60,
            trust_init: 0.1,
            trust_expand: 1.5,
            trust_shrink: 0.5,
            trust_min: 1e-4,
            trust_max: 1.0,
            accept_ratio: 0.25,
            min_model_improve: 1e-6,
            min_model_improve_frac: 1e-5,
            qp_max_iters: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveQuery {
    pub start: JointConfig,
    pub goal: PlanarPose,
    pub init_traj: Trajectory,
    pub tolerance: f64,
    pub waypoints: usize,
    /// Immutable waypoints preceding `start`; costed but not optimized.
    pub fixed_prefix: Vec<JointConfig>,
    /// Return the init when it is feasible and no optimized iterate is
    /// cheaper. This makes a solve from a feasible init a descent step.
    pub keep_feasible_init: bool,
}

impl SolveQuery {
    pub fn new(
        start: JointConfig,
        goal: PlanarPose,
        init_traj: Trajectory,
        tolerance: f64,
    ) -> Self {
        let waypoints = init_traj.len();
        Self {
            start,
            goal,
            init_traj,
            tolerance,
            waypoints,
            fixed_prefix: Vec::new(),
            keep_feasible_init: true,
        }
    }

    /// Always return an optimized iterate, even when the init is feasible
    /// and cheaper. At loose tolerances the init can be feasible while
    /// still passing through obstacles.
    pub fn without_init_fallback(mut self) -> Self {
        self.keep_feasible_init = false;
        self
    }

    pub fn with_prefix(mut self, prefix: Vec<JointConfig>) -> Self {
        self.fixed_prefix = prefix;
        self
    }

    fn validate(&self, arm: &ArmModel) -> Result<(), OptimizerError> {
        if self.waypoints < 2 {
            return Err(OptimizerError::TooFewWaypoints {
                needed: 2,
                got: self.waypoints,
            });
        }
        if self.init_traj.len() != self.waypoints {
            return Err(OptimizerError::InvalidQuery(format!(
                "init trajectory has {} waypoints, query asks for {}",
                self.init_traj.len(),
                self.waypoints
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(OptimizerError::InvalidQuery(format!(
                "tolerance {} is negative",
                self.tolerance
            )));
        }
        let dof = arm.dof();
        let configs = std::iter::once(&self.start)
            .chain(self.init_traj.waypoints())
            .chain(&self.fixed_prefix);
        for (index, q) in configs.enumerate() {
            if q.dof() != dof {
                return Err(OptimizerError::DimensionMismatch {
                    index,
                    expected: dof,
                    got: q.dof(),
                });
            }
        }
        Ok(())
    }
}

/// Merit values of accepted steps, one list per penalty phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub phases: Vec<PhaseTrace>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTrace {
    pub penalty: f64,
    pub merits: Vec<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub success: bool,
    pub trajectory: Trajectory,
    pub cost: f64,
    pub max_violation: f64,
    pub violations: Violations,
    pub sqp_iterations: usize,
    pub penalty_phases: usize,
    pub wall_time: f64,
    pub trace: SolveTrace,
}

/// Optimizer with a fixed arm, obstacle set and configuration.
#[derive(Debug, Clone)]
pub struct TrajectoryOptimizer<'a> {
    pub arm: &'a ArmModel,
    pub obstacles: &'a [Obstacle],
    pub config: SolverConfig,
}

impl<'a> TrajectoryOptimizer<'a> {
    pub fn new(arm: &'a ArmModel, obstacles: &'a [Obstacle]) -> Self {
        Self {
            arm,
            obstacles,
            config: SolverConfig::default(),
        }
    }

    pub fn with_config(mut self, config: SolverConfig) -> Self {
        self.config = config;
        self
    }

    /// Penalized objective of `query` at the given penalty multiplier.
    pub fn objective(&self, query: &SolveQuery, penalty: f64) -> PenalizedObjective<'_> {
        PenalizedObjective::new(
            self.arm,
            self.obstacles,
            &query.start,
            &query.fixed_prefix,
            query.goal,
            query.waypoints,
            &self.config,
            penalty,
        )
    }

    /// Constraint violations of `traj` against `query`, measured the same
    /// way `solve` decides success.
    pub fn violations(&self, query: &SolveQuery, traj: &Trajectory) -> Violations {
        self.objective(query, self.config.initial_penalty)
            .trajectory_violations(traj)
    }

    /// Runs the penalty SQP. Well-formed queries never error; a failed solve
    /// is reported through `success = false`.
    pub fn solve(&self, query: &SolveQuery) -> Result<SolveResult, OptimizerError> {
        query.validate(self.arm)?;
        let clock = Instant::now();
        let cfg = &self.config;
        let mut objective = self.objective(query, cfg.initial_penalty);
        let mut x = objective.vars_from(&query.init_traj);
        let dof = self.arm.dof();
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(
                self.arm.joint_lower()[i % dof],
                self.arm.joint_upper()[i % dof],
            );
        }
        let hessian = objective.cost_hessian();
        let (lower, upper) = (self.arm.joint_lower(), self.arm.joint_upper());
        let prefix = Some(query.fixed_prefix.as_slice());

        let init_viol = objective.violations(&x);
        let mut best: Option<(Trajectory, f64, Violations)> = None;
        if query.keep_feasible_init && init_viol.max() <= query.tolerance {
            let init = objective.trajectory_from(&x);
            let c = trajectory_cost_weighted(&init, prefix, &cfg.weights)?;
            best = Some((init, c, init_viol));
        }

        let mut trace = SolveTrace::default();
        let mut iterations = 0;
        let mut phases = 0;
        let mut last_viol = init_viol;
        let qp = IpmSettings {
            max_iters: cfg.qp_max_iters,
            ..IpmSettings::default()
        };
        let mut lo = vec![0.0; x.len()];
        let mut hi = vec![0.0; x.len()];
        let mut candidate = vec![0.0; x.len()];

        'phases: for phase in 0..cfg.max_penalty_phases {
            phases = phase + 1;
            let mut phase_trace = PhaseTrace {
                penalty: objective.penalty,
                ..PhaseTrace::default()
            };
            let mut trust = cfg.trust_init;
            let mut lin = objective.linearize(&x);
            phase_trace.merits.push(lin.merit);
            for _ in 0..cfg.max_sqp_iters {
                iterations += 1;
                // x stays within limits, so lo <= 0 <= hi
                for i in 0..x.len() {
                    let j = i % dof;
                    lo[i] = (lower[j] - x[i]).max(-trust);
                    hi[i] = (upper[j] - x[i]).min(trust);
                }
                let step_problem = StepProblem {
                    hessian: &hessian,
                    gradient: &lin.cost_gradient,
                    rows: &lin.rows,
                    lower: &lo,
                    upper: &hi,
                };
                let Some(step) = subproblem::solve(&step_problem, &qp) else {
                    break 'phases;
                };
                let predicted = -step_problem.model_delta(&step);
                if predicted < cfg.min_model_improve
                    || predicted < cfg.min_model_improve_frac * lin.merit.abs()
                {
                    break;
                }
                for i in 0..x.len() {
                    let j = i % dof;
                    candidate[i] = (x[i] + step[i]).clamp(lower[j], upper[j]);
                }
                let merit = objective.value(&candidate);
                let actual = lin.merit - merit;
                if actual > cfg.accept_ratio * predicted {
                    x.copy_from_slice(&candidate);
                    trust = (trust * cfg.trust_expand).min(cfg.trust_max);
                    lin = objective.linearize(&x);
                    phase_trace.merits.push(lin.merit);
                } else {
                    trust *= cfg.trust_shrink;
                    if trust < cfg.trust_min {
                        break;
                    }
                }
            }
            let traj = objective.trajectory_from(&x);
            let viol = objective.trajectory_violations(&traj);
            phase_trace.violation = viol.max();
            trace.phases.push(phase_trace);
            last_viol = viol;
            if viol.max() <= query.tolerance {
                let c = trajectory_cost_weighted(&traj, prefix, &cfg.weights)?;
                if best.as_ref().map_or(true, |b| c < b.1) {
                    best = Some((traj, c, viol));
                }
                break;
            }
            objective.penalty *= cfg.penalty_growth;
        }

        let wall_time = clock.elapsed().as_secs_f64();
        let result = match best {
            Some((trajectory, cost, violations)) => SolveResult {
                success: true,
                trajectory,
                cost,
                max_violation: violations.max(),
                violations,
                sqp_iterations: iterations,
                penalty_phases: phases,
                wall_time,
                trace,
            },
            None => {
                let trajectory = objective.trajectory_from(&x);
                let cost = trajectory_cost_weighted(&trajectory, prefix, &cfg.weights)?;
                SolveResult {
                    success: false,
                    trajectory,
                    cost,
                    max_violation: last_viol.max(),
                    violations: last_viol,
                    sqp_iterations: iterations,
                    penalty_phases: phases,
                    wall_time,
                    trace,
                }
            }
        };
        debug_assert!(!result.success || result.max_violation <= query.tolerance);
        Ok(result)
    }
}
