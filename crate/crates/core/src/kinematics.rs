//! Planar serial arm: forward kinematics, Jacobian and damped least-squares IK.
//!
//! The arm lives in a vertical plane (`x` horizontal, `y` up). Every joint is
//! revolute about the plane normal, so a configuration is one angle per link
//! and the end-effector pose is a [`PlanarPose`].

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use nalgebra::{Matrix3, Matrix3xX, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("configuration has {got} joints, arm has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid arm model: {0}")]
    InvalidArm(String),
    #[error("inverse kinematics did not converge (position error {position_error:.3e} m, orientation error {orientation_error:.3e} rad)")]
    NotConverged {
        position_error: f64,
        orientation_error: f64,
    },
    #[error("target lies {distance:.3} m from the base, beyond the {reach:.3} m reach")]
    OutOfReach { distance: f64, reach: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can land on exactly 2pi - tiny for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Position and heading in the arm's plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: normalize_angle(phi),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Unit vector along the heading.
    pub fn heading(&self) -> Point {
        Point::new(self.phi.cos(), self.phi.sin())
    }

    /// Euclidean position error and wrapped heading error (`other - self`).
    pub fn error_to(&self, other: &PlanarPose) -> (f64, f64) {
        let dp = (other.position() - self.position()).norm();
        (dp, normalize_angle(other.phi - self.phi))
    }
}

/// One joint angle per link, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles)
    }

    pub fn zeros(dof: usize) -> Self {
        Self(vec![0.0; dof])
    }

    pub fn dof(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `(1 - t) * self + t * other`. Returns `self` bitwise at `t == 0`
    /// and `other` bitwise at `t == 1`.
    pub fn lerp(&self, other: &JointConfig, t: f64) -> JointConfig {
        if t == 0.0 {
            return self.clone();
        }
        if t == 1.0 {
            return other.clone();
        }
        JointConfig(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }
}

impl Deref for JointConfig {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointConfig {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Planar N-revolute serial arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    link_lengths: Vec<f64>,
    joint_lower: Vec<f64>,
    joint_upper: Vec<f64>,
    base: PlanarPose,
    /// Distance from the end-effector frame origin to the grasp center.
    gripper_standoff: f64,
    /// Half-thickness of every link, subtracted from signed distances.
    link_radius: f64,
}

impl Default for ArmModel {
    /// Five links, 1.45 m total reach, base at the origin facing `+x`.
    fn default() -> Self {
        let j2 = 2.6;
        Self {
            link_lengths: vec![0.40, 0.35, 0.30, 0.25, 0.15],
            joint_lower: vec![-PI, -j2, -j2, -j2, -j2],
            joint_upper: vec![PI, j2, j2, j2, j2],
            base: PlanarPose::new(0.0, 0.0, 0.0),
            gripper_standoff: 0.04,
            link_radius: 0.02,
        }
    }
}

impl ArmModel {
    pub fn new(
        link_lengths: Vec<f64>,
        joint_lower: Vec<f64>,
        joint_upper: Vec<f64>,
        base: PlanarPose,
        gripper_standoff: f64,
        link_radius: f64,
    ) -> Result<Self, KinematicsError> {
        let arm = Self {
            link_lengths,
            joint_lower,
            joint_upper,
            base,
            gripper_standoff,
            link_radius,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let n = self.link_lengths.len();
        if n < 2 {
            return Err(KinematicsError::InvalidArm(format!(
                "need at least 2 links, got {n}"
            )));
        }
        if self.joint_lower.len() != n || self.joint_upper.len() != n {
            return Err(KinematicsError::InvalidArm(
                "joint limit count differs from link count".into(),
            ));
        }
        if let Some(l) = self.link_lengths.iter().find(|l| !(**l > 0.0)) {
            return Err(KinematicsError::InvalidArm(format!(
                "link length {l} is not positive"
            )));
        }
        for (j, (lo, hi)) in self.joint_lower.iter().zip(&self.joint_upper).enumerate() {
            if !(lo < hi) {
                return Err(KinematicsError::InvalidArm(format!(
                    "joint {j}: lower limit {lo} is not below upper limit {hi}"
                )));
            }
        }
        if !(self.gripper_standoff >= 0.0) {
            return Err(KinematicsError::InvalidArm(
                "gripper standoff must be non-negative".into(),
            ));
        }
        if !(self.link_radius >= 0.0) {
            return Err(KinematicsError::InvalidArm(
                "link radius must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn joint_lower(&self) -> &[f64] {
        &self.joint_lower
    }

    pub fn joint_upper(&self) -> &[f64] {
        &self.joint_upper
    }

    pub fn base(&self) -> PlanarPose {
        self.base
    }

    pub fn gripper_standoff(&self) -> f64 {
        self.gripper_standoff
    }

    pub fn link_radius(&self) -> f64 {
        self.link_radius
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(self.joint_lower.iter().zip(&self.joint_upper))
            .all(|(a, (lo, hi))| *a >= *lo && *a <= *hi)
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) {
        for (a, (lo, hi)) in q
            .iter_mut()
            .zip(self.joint_lower.iter().zip(&self.joint_upper))
        {
            *a = a.clamp(*lo, *hi);
        }
    }

    /// Largest distance by which any joint exceeds its limits.
    pub fn limit_overshoot(&self, q: &[f64]) -> f64 {
        q.iter()
            .zip(self.joint_lower.iter().zip(&self.joint_upper))
            .map(|(a, (lo, hi))| (a - hi).max(lo - a).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Joint positions and end-effector pose.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<ArmPose, KinematicsError> {
        self.check_dim(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn fk_unchecked(&self, q: &[f64]) -> ArmPose {
        let mut points = Vec::with_capacity(self.dof() + 1);
        let mut p = self.base.position();
        let mut heading = self.base.phi;
        points.push(p);
        for (len, angle) in self.link_lengths.iter().zip(q) {
            heading += angle;
            p += *len * Point::new(heading.cos(), heading.sin());
            points.push(p);
        }
        ArmPose {
            ee: PlanarPose::new(p.x, p.y, heading),
            points,
        }
    }

    /// Rows are d(x, y, phi)/dq of the end-effector.
    pub fn jacobian(&self, q: &[f64]) -> Result<Matrix3xX<f64>, KinematicsError> {
        self.check_dim(q)?;
        let pose = self.fk_unchecked(q);
        Ok(pose.ee_jacobian())
    }

    /// Damped least-squares IK with per-step clamping and joint-limit
    /// projection.
    pub fn ik_solve(
        &self,
        target: &PlanarPose,
        seed: &JointConfig,
        opts: &IkOptions,
    ) -> Result<JointConfig, KinematicsError> {
        self.check_dim(seed)?;
        if !(opts.tol > 0.0) {
            return Err(KinematicsError::BadTolerance(opts.tol));
        }
        let distance = (target.position() - self.base.position()).norm();
        if distance > self.reach() + opts.tol {
            return Err(KinematicsError::OutOfReach {
                distance,
                reach: self.reach(),
            });
        }
        let mut q = seed.clone();
        self.clamp_to_limits(&mut q);
        let damping2 = opts.damping * opts.damping;
        let mut last = (f64::INFINITY, f64::INFINITY);
        for _ in 0..=opts.max_iters {
            let pose = self.fk_unchecked(&q);
            let (ep, eo) = pose.ee.error_to(target);
            last = (ep, eo.abs());
            if ep <= opts.tol && eo.abs() <= opts.tol {
                return Ok(q);
            }
            let err = Vector3::new(target.x - pose.ee.x, target.y - pose.ee.y, eo);
            let jac = pose.ee_jacobian();
            let jjt = &jac * jac.transpose() + Matrix3::identity() * damping2;
            let Some(w) = jjt.lu().solve(&err) else {
                break;
            };
            let dq = jac.transpose() * w;
            let biggest = dq.amax();
            let scale = if biggest > opts.max_step {
                opts.max_step / biggest
            } else {
                1.0
            };
            for (a, d) in q.iter_mut().zip(dq.iter()) {
                *a += scale * d;
            }
            self.clamp_to_limits(&mut q);
        }
        Err(KinematicsError::NotConverged {
            position_error: last.0,
            orientation_error: last.1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Largest per-joint change in one iteration, radians.
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 200,
            damping: 0.05,
            max_step: 0.3,
        }
    }
}

impl IkOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Result of forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPose {
    /// Base, every joint, then the end-effector: `dof + 1` points.
    pub points: Vec<Point>,
    pub ee: PlanarPose,
}

impl ArmPose {
    /// Link `i` runs from `points[i]` to `points[i + 1]`.
    pub fn link(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[i + 1])
    }

    pub fn num_links(&self) -> usize {
        self.points.len() - 1
    }

    /// d(p)/dq_j for a point `p` rigidly attached to link `link`.
    /// Zero for joints beyond that link.
    pub fn point_velocity(&self, link: usize, p: Point, joint: usize) -> Point {
        if joint > link {
            return Point::zeros();
        }
        let r = p - self.points[joint];
        Point::new(-r.y, r.x)
    }

    pub fn ee_jacobian(&self) -> Matrix3xX<f64> {
        let n = self.num_links();
        let ee = self.ee.position();
        let mut jac = Matrix3xX::zeros(n);
        for j in 0..n {
            let v = self.point_velocity(n - 1, ee, j);
            jac[(0, j)] = v.x;
            jac[(1, j)] = v.y;
            jac[(2, j)] = 1.0;
        }
        jac
    }
}
