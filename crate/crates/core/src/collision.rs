//! Signed distances between arm links (segments) and primitive obstacles.
//!
//! Positive distances are separations, negative ones penetration depths.
//! Every query also yields a [`Contact`] carrying the witness point on the
//! segment and the direction in which moving that point increases the
//! signed distance, which is what the optimizer linearizes.

use serde::{Deserialize, Serialize};

use crate::kinematics::{ArmModel, ArmPose, JointConfig, Point};
use crate::optimizer::Trajectory;

/// Reported when there is nothing to collide with.
pub const CLEARANCE_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub half_extents: Point,
}

impl Rect {
    pub fn new(center: Point, half_extents: Point) -> Self {
        Self {
            center,
            half_extents,
        }
    }

    pub fn min(&self) -> Point {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Point {
        self.center + self.half_extents
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_extents.x
    }

    pub fn height(&self) -> f64 {
        2.0 * self.half_extents.y
    }

    pub fn contains(&self, p: Point) -> bool {
        let d = (p - self.center).abs() - self.half_extents;
        d.x <= 0.0 && d.y <= 0.0
    }

    fn corners(&self) -> [Point; 4] {
        let (lo, hi) = (self.min(), self.max());
        [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Rect(Rect),
    Disc(Disc),
}

impl Shape {
    pub fn center(&self) -> Point {
        match self {
            Shape::Rect(r) => r.center,
            Shape::Disc(d) => d.center,
        }
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn aabb(&self) -> (Point, Point) {
        match self {
            Shape::Rect(r) => (r.min(), r.max()),
            Shape::Disc(d) => {
                let e = Point::new(d.radius, d.radius);
                (d.center - e, d.center + e)
            }
        }
    }

    pub fn segment_contact(&self, a: Point, b: Point) -> Contact {
        match self {
            Shape::Rect(r) => segment_rect_contact(a, b, r),
            Shape::Disc(d) => segment_disc_contact(a, b, d),
        }
    }

    pub fn translated(&self, by: Point) -> Shape {
        match *self {
            Shape::Rect(r) => Shape::Rect(Rect::new(r.center + by, r.half_extents)),
            Shape::Disc(d) => Shape::Disc(Disc::new(d.center + by, d.radius)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub is_target: bool,
}

impl Obstacle {
    pub fn rect(center: Point, half_extents: Point) -> Self {
        Self {
            shape: Shape::Rect(Rect::new(center, half_extents)),
            is_target: false,
        }
    }

    pub fn disc(center: Point, radius: f64) -> Self {
        Self {
            shape: Shape::Disc(Disc::new(center, radius)),
            is_target: false,
        }
    }

    pub fn as_target(mut self) -> Self {
        self.is_target = true;
        self
    }
}

/// Signed distance plus the data needed to differentiate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub distance: f64,
    /// Witness point on the segment.
    pub point: Point,
    /// d(distance)/d(point). Unit length except on penetration ridges, where
    /// it is a convex combination of two face normals.
    pub normal: Point,
}

pub fn sd_segment_rect(a: Point, b: Point, rect: &Rect) -> f64 {
    segment_rect_contact(a, b, rect).distance
}

pub fn sd_segment_disc(a: Point, b: Point, disc: &Disc) -> f64 {
    segment_disc_contact(a, b, disc).distance
}

fn closest_on_segment(a: Point, b: Point, p: Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + t * ab
}

fn fallback_normal(a: Point, b: Point) -> Point {
    let ab = b - a;
    let n = ab.norm();
    if n > 0.0 {
        Point::new(-ab.y / n, ab.x / n)
    } else {
        Point::new(1.0, 0.0)
    }
}

pub fn segment_disc_contact(a: Point, b: Point, disc: &Disc) -> Contact {
    let p = closest_on_segment(a, b, disc.center);
    let r = p - disc.center;
    let d = r.norm();
    let normal = if d > 0.0 {
        r / d
    } else {
        fallback_normal(a, b)
    };
    Contact {
        distance: d - disc.radius,
        point: p,
        normal,
    }
}

/// Liang-Barsky clip of `a + t (b - a)`, `t` in `[0, 1]`, against the box.
fn clip_segment(a: Point, b: Point, rect: &Rect) -> Option<(f64, f64)> {
    let (lo, hi) = (rect.min(), rect.max());
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for axis in 0..2 {
        if d[axis] == 0.0 {
            if a[axis] < lo[axis] || a[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let mut ta = (lo[axis] - a[axis]) / d[axis];
        let mut tb = (hi[axis] - a[axis]) / d[axis];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

pub fn segment_rect_contact(a: Point, b: Point, rect: &Rect) -> Contact {
    match clip_segment(a, b, rect) {
        Some(_) => penetration_contact(a, b, rect),
        None => separation_contact(a, b, rect),
    }
}

fn separation_contact(a: Point, b: Point, rect: &Rect) -> Contact {
    let (lo, hi) = (rect.min(), rect.max());
    let mut best = Contact {
        distance: f64::INFINITY,
        point: a,
        normal: Point::new(1.0, 0.0),
    };
    let mut consider = |on_seg: Point, on_rect: Point| {
        let r = on_seg - on_rect;
        let d = r.norm();
        if d < best.distance {
            best = Contact {
                distance: d,
                point: on_seg,
                normal: if d > 0.0 {
                    r / d
                } else {
                    fallback_normal(a, b)
                },
            };
        }
    };
    for p in [a, b] {
        consider(p, Point::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y)));
    }
    for c in rect.corners() {
        consider(closest_on_segment(a, b, c), c);
    }
    best
}

/// Minimum translation that separates an intersecting segment from the
/// rectangle, found over the separating axes `x`, `y` and the segment normal.
///
/// Along a box axis the witness is the segment endpoint that trails the push.
/// Along the segment normal it is the foot of the deepest corner on the
/// segment's line: rotating the line about that point leaves the overlap
/// unchanged to first order, so the rigid-point gradient is exact.
fn penetration_contact(a: Point, b: Point, rect: &Rect) -> Contact {
    let corners = rect.corners();
    let mut best = Contact {
        distance: f64::NEG_INFINITY,
        point: a,
        normal: Point::new(1.0, 0.0),
    };
    let mut consider = |overlap: f64, point: Point, normal: Point| {
        if -overlap > best.distance {
            best = Contact {
                distance: -overlap,
                point,
                normal,
            };
        }
    };
    let (lo, hi) = (rect.min(), rect.max());
    for axis in 0..2 {
        let (trail_lo, trail_hi) = if a[axis] <= b[axis] { (a, b) } else { (b, a) };
        let mut u = Point::zeros();
        u[axis] = 1.0;
        // push towards +u until the lowest endpoint clears the top face
        consider(hi[axis] - trail_lo[axis], trail_lo, u);
        consider(trail_hi[axis] - lo[axis], trail_hi, -u);
    }
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 > 0.0 {
        let n = fallback_normal(a, b);
        for v in [n, -n] {
            let (deepest, overlap) = corners.iter().map(|&c| (c, (c - a).dot(&v))).fold(
                (corners[0], f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
            let foot = a + ((deepest - a).dot(&ab) / len2) * ab;
            consider(overlap, foot, v);
        }
    }
    best.distance = best.distance.min(0.0);
    best
}

/// Where the minimum clearance was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub link: usize,
    pub obstacle: usize,
    pub waypoint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceReport {
    pub min_distance: f64,
    pub witness: Option<Witness>,
}

impl ClearanceReport {
    fn empty() -> Self {
        Self {
            min_distance: CLEARANCE_CAP,
            witness: None,
        }
    }

    fn merge(&mut self, other: ClearanceReport) {
        if other.min_distance < self.min_distance {
            *self = other;
        }
    }
}

/// Link-vs-obstacle clearance of an already computed arm pose.
pub fn pose_clearance(
    arm: &ArmModel,
    pose: &ArmPose,
    obstacles: &[Obstacle],
    include_target: bool,
) -> ClearanceReport {
    let mut report = ClearanceReport::empty();
    for (oi, obstacle) in obstacles.iter().enumerate() {
        if obstacle.is_target && !include_target {
            continue;
        }
        for link in 0..pose.num_links() {
            let (a, b) = pose.link(link);
            let d = obstacle.shape.segment_contact(a, b).distance - arm.link_radius();
            if d < report.min_distance {
                report = ClearanceReport {
                    min_distance: d,
                    witness: Some(Witness {
                        link,
                        obstacle: oi,
                        waypoint: 0,
                    }),
                };
            }
        }
    }
    report
}

/// Minimum signed distance between any link and any obstacle, minus the
/// link radius. The target is skipped unless `include_target`.
pub fn config_clearance(
    arm: &ArmModel,
    q: &JointConfig,
    obstacles: &[Obstacle],
    include_target: bool,
) -> ClearanceReport {
    let pose = arm.fk_unchecked(q);
    pose_clearance(arm, &pose, obstacles, include_target)
}

/// Whether any link comes closer than zero clearance to an obstacle; the
/// boolean form of [`config_clearance`] with early exit.
pub fn config_collides(arm: &ArmModel, q: &JointConfig, obstacles: &[Obstacle], include_target: bool) -> bool {
    let pose = arm.fk_unchecked(q);
    let r = arm.link_radius();
    (0..pose.num_links()).any(|link| {
        let (a, b) = pose.link(link);
        let (lo, hi) = (a.inf(&b), a.sup(&b));
        obstacles.iter().any(|o| {
            if o.is_target && !include_target {
                return false;
            }
            let (olo, ohi) = o.shape.aabb();
            let apart = lo.x - r > ohi.x || hi.x + r < olo.x || lo.y - r > ohi.y || hi.y + r < olo.y;
            !apart && o.shape.segment_contact(a, b).distance - r < 0.0
        })
    })
}

/// Number of interpolation steps for a joint-space segment: the smallest
/// power of two whose steps are no longer than `resolution`. Halving the
/// resolution therefore only ever adds samples.
pub fn interpolation_steps(from: &JointConfig, to: &JointConfig, resolution: f64) -> usize {
    let span = from.max_abs_diff(to);
    let mut steps = 1usize;
    while span / steps as f64 > resolution && steps < (1 << 20) {
        steps *= 2;
    }
    steps
}

/// Clearance over the linear interpolation of consecutive waypoints.
pub fn trajectory_clearance(
    arm: &ArmModel,
    traj: &Trajectory,
    obstacles: &[Obstacle],
    resolution: f64,
    include_target: bool,
) -> ClearanceReport {
    assert!(resolution > 0.0, "resolution must be positive");
    let wps = traj.waypoints();
    let mut report = ClearanceReport::empty();
    let tag = |r: ClearanceReport, waypoint: usize| ClearanceReport {
        min_distance: r.min_distance,
        witness: r.witness.map(|w| Witness { waypoint, ..w }),
    };
    report.merge(tag(
        config_clearance(arm, &wps[0], obstacles, include_target),
        0,
    ));
    for (i, pair) in wps.windows(2).enumerate() {
        let steps = interpolation_steps(&pair[0], &pair[1], resolution);
        for k in 1..=steps {
            let q = pair[0].lerp(&pair[1], k as f64 / steps as f64);
            let wp = if k == steps { i + 1 } else { i };
            report.merge(tag(
                config_clearance(arm, &q, obstacles, include_target),
                wp,
            ));
        }
    }
    report
}
