//! The exact-penalty merit function of one solve query.

use super::banded::BandedSym;
use super::cost::SmoothnessForm;
use super::subproblem::{Penalty, PenaltyRows};
use super::{SolverConfig, Trajectory};
use crate::collision::{trajectory_clearance, Obstacle};
use crate::kinematics::{normalize_angle, ArmModel, ArmPose, JointConfig, PlanarPose};

/// Breakdown of constraint violations, in meters or radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violations {
    /// `max(position error, |orientation error|)` of the last waypoint.
    pub goal: f64,
    /// `max(margin - clearance, 0)` over the interpolated trajectory.
    pub collision: f64,
    pub joint_limits: f64,
}

impl Violations {
    pub fn max(&self) -> f64 {
        self.goal.max(self.collision).max(self.joint_limits)
    }
}

/// Smoothness cost plus `penalty` times the l1 constraint violations.
///
/// Variables are waypoints `1..n` of the horizon flattened waypoint-major;
/// waypoint 0 is the fixed start and `prefix` precedes it.
pub struct PenalizedObjective<'a> {
    arm: &'a ArmModel,
    obstacles: Vec<Obstacle>,
    start: JointConfig,
    prefix: Vec<JointConfig>,
    goal: PlanarPose,
    waypoints: usize,
    config: &'a SolverConfig,
    smooth: SmoothnessForm,
    pub penalty: f64,
}

/// A collision sample: configuration `(1 - t) * wp[seg] + t * wp[seg + 1]`.
#[derive(Debug, Clone, Copy)]
struct Sample {
    seg: usize,
    t: f64,
}

pub(crate) struct Linearization {
    pub merit: f64,
    pub cost_gradient: Vec<f64>,
    pub rows: PenaltyRows,
}

impl<'a> PenalizedObjective<'a> {
    pub fn new(
        arm: &'a ArmModel,
        obstacles: &[Obstacle],
        start: &JointConfig,
        prefix: &[JointConfig],
        goal: PlanarPose,
        waypoints: usize,
        config: &'a SolverConfig,
        penalty: f64,
    ) -> Self {
        assert!(waypoints >= 2);
        let obstacles = obstacles
            .iter()
            .filter(|o| config.avoid_target || !o.is_target)
            .copied()
            .collect();
        let smooth = SmoothnessForm::new(prefix.len() + waypoints, &config.weights);
        Self {
            arm,
            obstacles,
            start: start.clone(),
            prefix: prefix.to_vec(),
            goal,
            waypoints,
            config,
            smooth,
            penalty,
        }
    }

    pub fn dof(&self) -> usize {
        self.arm.dof()
    }

    pub fn num_vars(&self) -> usize {
        (self.waypoints - 1) * self.dof()
    }

    pub fn vars_from(&self, traj: &Trajectory) -> Vec<f64> {
        traj.waypoints()[1..]
            .iter()
            .flat_map(|q| q.iter().copied())
            .collect()
    }

    pub fn trajectory_from(&self, x: &[f64]) -> Trajectory {
        let mut wps = Vec::with_capacity(self.waypoints);
        wps.push(self.start.clone());
        wps.extend(x.chunks(self.dof()).map(|c| JointConfig::new(c.to_vec())));
        Trajectory::from_waypoints_unchecked(wps)
    }

    /// Value of sequence entry `i` (prefix, start, then variables) of joint `j`.
    fn seq(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let p = self.prefix.len();
        if i < p {
            self.prefix[i][j]
        } else if i == p {
            self.start[j]
        } else {
            x[(i - p - 1) * self.dof() + j]
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        let dof = self.dof();
        let len = self.smooth.len();
        let mut total = 0.0;
        for j in 0..dof {
            for i in 0..len {
                let si = self.seq(x, i, j);
                total += si * self.smooth.apply(|k| self.seq(x, k, j), i);
            }
        }
        total
    }

    fn cost_gradient(&self, x: &[f64]) -> Vec<f64> {
        let dof = self.dof();
        let first_free = self.prefix.len() + 1;
        let mut g = vec![0.0; x.len()];
        for w in 0..(self.waypoints - 1) {
            for j in 0..dof {
                g[w * dof + j] = 2.0 * self.smooth.apply(|k| self.seq(x, k, j), first_free + w);
            }
        }
        g
    }

    pub(crate) fn cost_hessian(&self) -> BandedSym {
        self.smooth.hessian(self.prefix.len() + 1, self.dof())
    }

    fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        let per = self.config.collision_substeps + 1;
        (0..self.waypoints - 1).flat_map(move |seg| {
            (1..=per).map(move |k| Sample {
                seg,
                t: k as f64 / per as f64,
            })
        })
    }

    fn waypoint<'b>(&'b self, x: &'b [f64], w: usize) -> &'b [f64] {
        if w == 0 {
            &self.start
        } else {
            let dof = self.dof();
            &x[(w - 1) * dof..w * dof]
        }
    }

    fn sample_config(&self, x: &[f64], s: Sample) -> Vec<f64> {
        let a = self.waypoint(x, s.seg);
        let b = self.waypoint(x, s.seg + 1);
        if s.t == 1.0 {
            return b.to_vec();
        }
        a.iter().zip(b).map(|(p, q)| p + s.t * (q - p)).collect()
    }

    fn last_pose(&self, x: &[f64]) -> ArmPose {
        self.arm.fk_unchecked(self.waypoint(x, self.waypoints - 1))
    }

    /// Signed goal residuals `(dx, dy, dphi)` of the last waypoint.
    fn goal_residuals(&self, pose: &ArmPose) -> [f64; 3] {
        [
            pose.ee.x - self.goal.x,
            pose.ee.y - self.goal.y,
            normalize_angle(pose.ee.phi - self.goal.phi),
        ]
    }

    fn obstacle_near(&self, pose: &ArmPose, link: usize, o: &Obstacle, reach: f64) -> bool {
        let (a, b) = pose.link(link);
        let (lo, hi) = o.shape.aabb();
        let pad = reach + self.arm.link_radius();
        !(a.x.max(b.x) < lo.x - pad
            || a.x.min(b.x) > hi.x + pad
            || a.y.max(b.y) < lo.y - pad
            || a.y.min(b.y) > hi.y + pad)
    }

    fn collision_hinge_sum(&self, x: &[f64]) -> f64 {
        let margin = self.config.collision_margin;
        let mut total = 0.0;
        for s in self.samples() {
            let pose = self.arm.fk_unchecked(&self.sample_config(x, s));
            for link in 0..pose.num_links() {
                for o in &self.obstacles {
                    if !self.obstacle_near(&pose, link, o, margin) {
                        continue;
                    }
                    let (a, b) = pose.link(link);
                    let sd = o.shape.segment_contact(a, b).distance - self.arm.link_radius();
                    total += (margin - sd).max(0.0);
                }
            }
        }
        total
    }

    fn joint_overshoot_sum(&self, x: &[f64]) -> f64 {
        let dof = self.dof();
        let (lo, hi) = (self.arm.joint_lower(), self.arm.joint_upper());
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let j = i % dof;
                (v - hi[j]).max(lo[j] - v).max(0.0)
            })
            .sum()
    }

    /// Penalized objective value.
    pub fn value(&self, x: &[f64]) -> f64 {
        let goal: f64 = self
            .goal_residuals(&self.last_pose(x))
            .iter()
            .map(|r| r.abs())
            .sum();
        self.cost(x)
            + self.penalty * (goal + self.collision_hinge_sum(x) + self.joint_overshoot_sum(x))
    }

    /// Cost gradient plus penalty rows linearized at `x`. Collision rows are
    /// kept for pairs within `margin + buffer`.
    pub(crate) fn linearize(&self, x: &[f64]) -> Linearization {
        let dof = self.dof();
        let mut rows = PenaltyRows::new();
        let margin = self.config.collision_margin;
        let reach = margin + self.config.collision_buffer;
        let mut grad_q = vec![0.0; dof];
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * dof);

        for s in self.samples() {
            let pose = self.arm.fk_unchecked(&self.sample_config(x, s));
            for link in 0..pose.num_links() {
                for o in &self.obstacles {
                    if !self.obstacle_near(&pose, link, o, reach) {
                        continue;
                    }
                    let (a, b) = pose.link(link);
                    let c = o.shape.segment_contact(a, b);
                    let sd = c.distance - self.arm.link_radius();
                    if sd > reach {
                        continue;
                    }
                    for (j, g) in grad_q.iter_mut().enumerate() {
                        *g = -c.normal.dot(&pose.point_velocity(link, c.point, j));
                    }
                    entries.clear();
                    if s.seg > 0 && s.t < 1.0 {
                        let base = (s.seg - 1) * dof;
                        entries.extend((0..dof).map(|j| (base + j, (1.0 - s.t) * grad_q[j])));
                    }
                    let base = s.seg * dof;
                    entries.extend((0..dof).map(|j| (base + j, s.t * grad_q[j])));
                    rows.push(
                        entries.iter().copied(),
                        margin - sd,
                        self.penalty,
                        Penalty::Hinge,
                    );
                }
            }
        }

        let pose = self.last_pose(x);
        let res = self.goal_residuals(&pose);
        let jac = pose.ee_jacobian();
        let base = (self.waypoints - 2) * dof;
        for (r, residual) in res.iter().enumerate() {
            rows.push(
                (0..dof).map(|j| (base + j, jac[(r, j)])),
                *residual,
                self.penalty,
                Penalty::Abs,
            );
        }

        Linearization {
            merit: self.value(x),
            cost_gradient: self.cost_gradient(x),
            rows,
        }
    }

    /// Analytic (sub)gradient of [`value`](Self::value).
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let lin = self.linearize(x);
        let mut g = lin.cost_gradient;
        for r in 0..lin.rows.len() {
            let slope = lin.rows.weight[r] * lin.rows.kind[r].slope(lin.rows.offset[r]);
            if slope == 0.0 {
                continue;
            }
            for (c, v) in lin.rows.row(r) {
                g[c] += slope * v;
            }
        }
        let dof = self.dof();
        let (lo, hi) = (self.arm.joint_lower(), self.arm.joint_upper());
        for (i, v) in x.iter().enumerate() {
            let j = i % dof;
            if *v > hi[j] {
                g[i] += self.penalty;
            } else if *v < lo[j] {
                g[i] -= self.penalty;
            }
        }
        g
    }

    /// Constraint violations of the trajectory encoded by `x`, with the
    /// collision term checked on the dense interpolation.
    pub fn violations(&self, x: &[f64]) -> Violations {
        let traj = self.trajectory_from(x);
        self.trajectory_violations(&traj)
    }

    pub fn trajectory_violations(&self, traj: &Trajectory) -> Violations {
        let last = traj.waypoints().last().expect("non-empty trajectory");
        let pose = self.arm.fk_unchecked(last);
        let res = self.goal_residuals(&pose);
        let goal = (res[0] * res[0] + res[1] * res[1]).sqrt().max(res[2].abs());
        let clearance = trajectory_clearance(
            self.arm,
            traj,
            &self.obstacles,
            self.config.dense_resolution,
            true,
        );
        let collision = (self.config.collision_margin - clearance.min_distance).max(0.0);
        let joint_limits = traj.waypoints()[1..]
            .iter()
            .map(|q| self.arm.limit_overshoot(q))
            .fold(0.0, f64::max);
        Violations {
            goal,
            collision,
            joint_limits,
        }
    }
}
