//! SVG drawings of a scene and a trajectory.

use std::fmt::Write as _;
use std::path::Path;

use crate::collision::Shape;
use crate::kinematics::{ArmModel, PlanarPose, Point};
use crate::optimizer::Trajectory;

use super::Scene;

const PX_PER_M: f64 = 400.0;

struct Frame {
    min: [f64; 2],
    max: [f64; 2],
}

impl Frame {
    fn x(&self, p: Point) -> f64 {
        (p.x - self.min[0]) * PX_PER_M
    }

    /// SVG's y axis points down.
    fn y(&self, p: Point) -> f64 {
        (self.max[1] - p.y) * PX_PER_M
    }

    fn size(&self) -> (f64, f64) {
        (
            (self.max[0] - self.min[0]) * PX_PER_M,
            (self.max[1] - self.min[1]) * PX_PER_M,
        )
    }
}

/// Obstacles (target highlighted), the arm at every waypoint with opacity
/// rising towards the end, and an optional grasp pose marker.
pub fn render_svg(
    arm: &ArmModel,
    scene: &Scene,
    traj: Option<&Trajectory>,
    grasp: Option<&PlanarPose>,
) -> String {
    let f = Frame {
        min: scene.workspace.min,
        max: scene.workspace.max,
    };
    let (w, h) = f.size();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect class="background" x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#ffffff"/>"##
    );
    for o in &scene.obstacles {
        let (class, fill) = if o.is_target {
            ("target", "#d62728")
        } else {
            ("obstacle", "#7f7f7f")
        };
        match &o.shape {
            Shape::Rect(r) => {
                let top_left = Point::new(r.min().x, r.max().y);
                let _ = writeln!(
                    s,
                    r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    f.x(top_left),
                    f.y(top_left),
                    r.width() * PX_PER_M,
                    r.height() * PX_PER_M
                );
            }
            Shape::Disc(d) => {
                let _ = writeln!(
                    s,
                    r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{fill}"/>"#,
                    f.x(d.center),
                    f.y(d.center),
                    d.radius * PX_PER_M
                );
            }
        }
    }
    if let Some(traj) = traj {
        let n = traj.len();
        let stroke = 2.0 * arm.link_radius() * PX_PER_M;
        for (i, q) in traj.waypoints().iter().enumerate() {
            let Ok(pose) = arm.forward_kinematics(q) else {
                continue;
            };
            let opacity = 0.15 + 0.85 * (i + 1) as f64 / n as f64;
            let pts: Vec<String> = pose
                .points
                .iter()
                .map(|&p| format!("{:.2},{:.2}", f.x(p), f.y(p)))
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline class="arm" points="{}" fill="none" stroke="#1f77b4" stroke-width="{stroke:.1}" stroke-linecap="round" stroke-linejoin="round" stroke-opacity="{opacity:.3}"/>"##,
                pts.join(" ")
            );
        }
    }
    if let Some(g) = grasp {
        let p = g.position();
        let tip = p + 0.05 * g.heading();
        let _ = writeln!(
            s,
            r##"<circle class="grasp" cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="#2ca02c" stroke-width="2"/>"##,
            f.x(p),
            f.y(p)
        );
        let _ = writeln!(
            s,
            r##"<line class="grasp" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#2ca02c" stroke-width="2"/>"##,
            f.x(p),
            f.y(p),
            f.x(tip),
            f.y(tip)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot_trajectory(
    arm: &ArmModel,
    scene: &Scene,
    traj: Option<&Trajectory>,
    grasp: Option<&PlanarPose>,
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    std::fs::write(path, render_svg(arm, scene, traj, grasp))
}
