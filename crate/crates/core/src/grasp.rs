//! Grasp poses on primitive targets.
//!
//! Rectangles are grasped from the left, right or top. On the right side the
//! anchor slides linearly from the right face midpoint (`theta = 0`) to the
//! top face midpoint (`theta = pi/2`) while the approach normal rotates with
//! `theta`; `s` offsets the grasp along the tangent. Discs are grasped along
//! any radial direction `alpha`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{Obstacle, Rect, Shape};
use crate::harness::{Scene, SceneError};
use crate::kinematics::{normalize_angle, PlanarPose, Point};

/// Slack for bound checks on parameters that went through a degree
/// conversion.
const BOUND_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("grasp angle {0} outside [0, pi/2]")]
    ThetaOutOfRange(f64),
    #[error("slide {s} outside [{min}, {max}]")]
    SlideOutOfRange { s: f64, min: f64, max: f64 },
    #[error("standoff {0} must be finite and nonnegative")]
    BadStandoff(f64),
    #[error("approach angle {0} is not finite")]
    BadAlpha(f64),
    #[error("overlap ratio {0} outside (0, 1]")]
    BadOverlap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Top,
}

impl Side {
    pub const ALL: [Side; 3] = [Side::Left, Side::Right, Side::Top];
}

/// Parameters of one grasp. `side`, `theta` and `s` apply to rectangles,
/// `alpha` to discs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspParams {
    pub side: Side,
    pub theta: f64,
    pub s: f64,
    pub alpha: f64,
    pub standoff: f64,
}

impl GraspParams {
    pub fn rect(side: Side, theta: f64, s: f64, standoff: f64) -> Self {
        let theta = if side == Side::Top { FRAC_PI_2 } else { theta };
        Self {
            side,
            theta,
            s,
            alpha: 0.0,
            standoff,
        }
    }

    pub fn disc(alpha: f64, standoff: f64) -> Self {
        Self {
            side: Side::Right,
            theta: 0.0,
            s: 0.0,
            alpha: alpha.rem_euclid(TAU),
            standoff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    pub standoff: f64,
    pub overlap_ratio: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            standoff: 0.04,
            overlap_ratio: 0.5,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.standoff.is_finite() && self.standoff >= 0.0) {
            return Err(GraspError::BadStandoff(self.standoff));
        }
        if !(self.overlap_ratio > 0.0 && self.overlap_ratio <= 1.0) {
            return Err(GraspError::BadOverlap(self.overlap_ratio));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub pose: PlanarPose,
    pub params: GraspParams,
    pub target_id: usize,
}

impl GraspPose {
    pub fn new(
        params: GraspParams,
        target: &Obstacle,
        target_id: usize,
        overlap_ratio: f64,
    ) -> Result<Self, GraspError> {
        check_bounds(&params, target, overlap_ratio)?;
        Ok(Self {
            pose: grasp_to_pose(&params, target)?,
            params,
            target_id,
        })
    }
}

/// Silhouette extent of a rectangle perpendicular to the approach normal
/// at angle `theta`.
pub fn silhouette_width(theta: f64, rect: &Rect) -> f64 {
    rect.width() * theta.sin().abs() + rect.height() * theta.cos().abs()
}

/// Slide bounds keeping at least `overlap_ratio` of the silhouette between
/// the fingers.
pub fn s_bounds(theta: f64, rect: &Rect, overlap_ratio: f64) -> (f64, f64) {
    let s_max = (1.0 - overlap_ratio) * silhouette_width(theta, rect) / 2.0;
    (-s_max, s_max)
}

fn check_bounds(
    params: &GraspParams,
    target: &Obstacle,
    overlap_ratio: f64,
) -> Result<(), GraspError> {
    if !(params.standoff.is_finite() && params.standoff >= 0.0) {
        return Err(GraspError::BadStandoff(params.standoff));
    }
    match &target.shape {
        Shape::Disc(_) => {
            if !params.alpha.is_finite() {
                return Err(GraspError::BadAlpha(params.alpha));
            }
        }
        Shape::Rect(rect) => {
            if !(params.theta >= -BOUND_EPS && params.theta <= FRAC_PI_2 + BOUND_EPS) {
                return Err(GraspError::ThetaOutOfRange(params.theta));
            }
            let (min, max) = s_bounds(rect_theta(params), rect, overlap_ratio);
            if !(params.s >= min - BOUND_EPS && params.s <= max + BOUND_EPS) {
                return Err(GraspError::SlideOutOfRange {
                    s: params.s,
                    min,
                    max,
                });
            }
        }
    }
    Ok(())
}

fn rect_theta(params: &GraspParams) -> f64 {
    if params.side == Side::Top {
        FRAC_PI_2
    } else {
        params.theta.clamp(0.0, FRAC_PI_2)
    }
}

/// Gripper pose of a grasp. The heading points from the gripper toward the
/// target along the approach direction.
pub fn grasp_to_pose(params: &GraspParams, target: &Obstacle) -> Result<PlanarPose, GraspError> {
    let d = params.standoff;
    if !(d.is_finite() && d >= 0.0) {
        return Err(GraspError::BadStandoff(d));
    }
    match &target.shape {
        Shape::Disc(disc) => {
            if !params.alpha.is_finite() {
                return Err(GraspError::BadAlpha(params.alpha));
            }
            let dir = Point::new(params.alpha.cos(), params.alpha.sin());
            let p = disc.center + (disc.radius + d) * dir;
            Ok(PlanarPose::new(p.x, p.y, (-dir.y).atan2(-dir.x)))
        }
        Shape::Rect(rect) => {
            if !(params.theta >= -BOUND_EPS && params.theta <= FRAC_PI_2 + BOUND_EPS) {
                return Err(GraspError::ThetaOutOfRange(params.theta));
            }
            let c = rect.center;
            let (hx, hy) = (rect.half_extents.x, rect.half_extents.y);
            let top = c + Point::new(0.0, hy);
            match params.side {
                Side::Top => {
                    let p = top + Point::new(params.s, d);
                    Ok(PlanarPose::new(p.x, p.y, -FRAC_PI_2))
                }
                Side::Right | Side::Left => {
                    let theta = params.theta.clamp(0.0, FRAC_PI_2);
                    let lambda = theta / FRAC_PI_2;
                    let right = c + Point::new(hx, 0.0);
                    let anchor = (1.0 - lambda) * right + lambda * top;
                    let n = Point::new(theta.cos(), theta.sin());
                    let t = Point::new(-n.y, n.x);
                    let p = anchor + d * n + params.s * t;
                    let phi = (-n.y).atan2(-n.x);
                    if params.side == Side::Right {
                        Ok(PlanarPose::new(p.x, p.y, phi))
                    } else {
                        Ok(PlanarPose::new(
                            2.0 * c.x - p.x,
                            p.y,
                            normalize_angle(PI - phi),
                        ))
                    }
                }
            }
        }
    }
}

/// Uniform random grasp on `target`.
pub fn sample_grasp<R: Rng + ?Sized>(
    target: &Obstacle,
    target_id: usize,
    config: &GraspConfig,
    rng: &mut R,
) -> GraspPose {
    let params = match &target.shape {
        Shape::Disc(_) => GraspParams::disc(rng.gen_range(0.0..TAU), config.standoff),
        Shape::Rect(rect) => {
            let side = Side::ALL[rng.gen_range(0..3)];
            let theta = if side == Side::Top {
                FRAC_PI_2
            } else {
                rng.gen_range(0.0..=FRAC_PI_2)
            };
            let (lo, hi) = s_bounds(theta, rect, config.overlap_ratio);
            let s = if hi > lo { rng.gen_range(lo..=hi) } else { 0.0 };
            GraspParams::rect(side, theta, s, config.standoff)
        }
    };
    let pose = grasp_to_pose(&params, target).expect("sampled parameters are in bounds");
    GraspPose {
        pose,
        params,
        target_id,
    }
}

/// The hand-chosen grasp declared by `scene`.
pub fn fixed_grasp(scene: &Scene) -> Result<GraspPose, SceneError> {
    scene.fixed_grasp()
}

/// Length of the intersection between the finger line and the target's
/// silhouette. The finger line has length `width`, is centered on the grasp
/// position and runs perpendicular to the approach direction.
pub fn finger_overlap(pose: &PlanarPose, target: &Obstacle, width: f64) -> f64 {
    let t = Point::new(-pose.phi.sin(), pose.phi.cos());
    let center = pose.position().dot(&t);
    let (lo, hi) = match &target.shape {
        Shape::Disc(disc) => {
            let c = disc.center.dot(&t);
            (c - disc.radius, c + disc.radius)
        }
        Shape::Rect(rect) => {
            let c = rect.center.dot(&t);
            let e = rect.half_extents.x * t.x.abs() + rect.half_extents.y * t.y.abs();
            (c - e, c + e)
        }
    };
    let a = (center - width / 2.0).max(lo);
    let b = (center + width / 2.0).min(hi);
    (b - a).max(0.0)
}

/// Silhouette width of the target seen along the grasp's approach
/// direction; the gripper opening used for overlap checks.
pub fn grasp_silhouette(params: &GraspParams, target: &Obstacle) -> f64 {
    match &target.shape {
        Shape::Disc(disc) => 2.0 * disc.radius,
        Shape::Rect(rect) => silhouette_width(rect_theta(params), rect),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> Obstacle {
        Obstacle::rect(Point::new(0.0, 0.0), Point::new(0.1, 0.1)).as_target()
    }

    #[test]
    fn disc_example() {
        let disc = Obstacle::disc(Point::new(1.0, 1.0), 0.1);
        let pose = grasp_to_pose(&GraspParams::disc(0.0, 0.05), &disc).unwrap();
        assert_abs_diff_eq!(pose.x, 1.15, epsilon = 1e-12);
        assert_abs_diff_eq!(pose.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pose.phi, PI, epsilon = 1e-12);
    }

    #[test]
    fn rect_boundary_poses() {
        let rect = Obstacle::rect(Point::new(0.5, 0.2), Point::new(0.125, 0.04));
        let d = 0.04;
        let p = grasp_to_pose(&GraspParams::rect(Side::Right, 0.0, 0.0, d), &rect).unwrap();
        assert_abs_diff_eq!(p.x, 0.5 + 0.125 + d, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.phi, PI, epsilon = 1e-12);
        let p = grasp_to_pose(&GraspParams::rect(Side::Right, FRAC_PI_2, 0.0, d), &rect).unwrap();
        assert_abs_diff_eq!(p.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.2 + 0.04 + d, epsilon = 1e-12);
        assert_abs_diff_eq!(p.phi, -FRAC_PI_2, epsilon = 1e-12);
        let p = grasp_to_pose(&GraspParams::rect(Side::Left, 0.0, 0.0, d), &rect).unwrap();
        assert_abs_diff_eq!(p.x, 0.5 - 0.125 - d, epsilon = 1e-12);
        assert_abs_diff_eq!(p.phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bounds_examples() {
        let Shape::Rect(rect) = square().shape else {
            unreachable!()
        };
        let (lo, hi) = s_bounds(0.0, &rect, 0.5);
        assert_abs_diff_eq!(lo, -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.05, epsilon = 1e-15);
        assert_eq!(s_bounds(0.7, &rect, 1.0), (-0.0, 0.0));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let target = square();
        let bad = GraspParams::rect(Side::Right, 0.0, 0.2, 0.04);
        assert!(GraspPose::new(bad, &target, 0, 0.5).is_err());
        let bad = GraspParams::rect(Side::Right, 2.0, 0.0, 0.04);
        assert!(grasp_to_pose(&bad, &target).is_err());
        let bad = GraspParams::rect(Side::Right, 0.0, 0.0, -1.0);
        assert!(grasp_to_pose(&bad, &target).is_err());
    }
}
