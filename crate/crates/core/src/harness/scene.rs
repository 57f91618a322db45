//! Scene definitions and their JSON file format.
//!
//! Files use degrees for every angle; [`Scene`] holds radians. The target is
//! always stored last in [`Scene::obstacles`].

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{config_clearance, Obstacle, Shape};
use crate::grasp::{GraspConfig, GraspParams, GraspPose, Side};
use crate::kinematics::{ArmModel, JointConfig, PlanarPose, Point};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("scene {0:?} declares no fixed grasp")]
    NoFixedGrasp(String),
    #[error("unknown built-in scene {0:?}")]
    UnknownScene(String),
}

fn invalid(msg: impl Into<String>) -> SceneError {
    SceneError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [-0.8, -0.6],
            max: [1.6, 1.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub arm: ArmModel,
    /// Obstacles with the target last.
    pub obstacles: Vec<Obstacle>,
    pub start: JointConfig,
    pub fixed_grasp: Option<GraspParams>,
    pub workspace: Workspace,
    pub grasp: GraspConfig,
}

impl Scene {
    /// Builds and validates a scene. Exactly one obstacle must be flagged as
    /// the target; it is moved to the end of the list.
    pub fn new(
        name: impl Into<String>,
        arm: ArmModel,
        obstacles: Vec<Obstacle>,
        start: JointConfig,
        fixed_grasp: Option<GraspParams>,
        workspace: Workspace,
        grasp: GraspConfig,
    ) -> Result<Self, SceneError> {
        let targets = obstacles.iter().filter(|o| o.is_target).count();
        if targets != 1 {
            return Err(invalid(format!(
                "expected exactly one target, found {targets}"
            )));
        }
        let (mut rest, target): (Vec<_>, Vec<_>) =
            obstacles.into_iter().partition(|o| !o.is_target);
        rest.extend(target);
        let scene = Self {
            name: name.into(),
            arm,
            obstacles: rest,
            start,
            fixed_grasp,
            workspace,
            grasp,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn target_id(&self) -> usize {
        self.obstacles.len() - 1
    }

    pub fn target(&self) -> &Obstacle {
        &self.obstacles[self.target_id()]
    }

    fn validate(&self) -> Result<(), SceneError> {
        self.arm.validate().map_err(|e| invalid(e.to_string()))?;
        self.grasp.validate().map_err(|e| invalid(e.to_string()))?;
        for (i, o) in self.obstacles.iter().enumerate() {
            let ok = match &o.shape {
                Shape::Rect(r) => {
                    r.center.iter().all(|v| v.is_finite())
                        && r.half_extents.iter().all(|v| v.is_finite() && *v > 0.0)
                }
                Shape::Disc(d) => {
                    d.center.iter().all(|v| v.is_finite()) && d.radius.is_finite() && d.radius > 0.0
                }
            };
            if !ok {
                return Err(invalid(format!(
                    "obstacle {i} has zero thickness or non-finite geometry"
                )));
            }
        }
        let w = &self.workspace;
        if !(w.min[0] < w.max[0] && w.min[1] < w.max[1]) {
            return Err(invalid("workspace bounds are empty"));
        }
        if self.start.dof() != self.arm.dof() {
            return Err(invalid(format!(
                "start has {} joints, arm has {}",
                self.start.dof(),
                self.arm.dof()
            )));
        }
        if !self.arm.within_limits(&self.start) {
            return Err(invalid("start violates joint limits"));
        }
        let clearance = config_clearance(&self.arm, &self.start, &self.obstacles, true);
        if !(clearance.min_distance > 0.0) {
            let witness = clearance
                .witness
                .map(|w| format!(" (link {} vs obstacle {})", w.link, w.obstacle))
                .unwrap_or_default();
            return Err(invalid(format!(
                "start is in collision, clearance {:.4} m{witness}",
                clearance.min_distance
            )));
        }
        if let Some(params) = &self.fixed_grasp {
            GraspPose::new(
                *params,
                self.target(),
                self.target_id(),
                self.grasp.overlap_ratio,
            )
            .map_err(|e| invalid(format!("fixed grasp: {e}")))?;
        }
        Ok(())
    }

    /// The declared fixed grasp.
    pub fn fixed_grasp(&self) -> Result<GraspPose, SceneError> {
        let params = self
            .fixed_grasp
            .ok_or_else(|| SceneError::NoFixedGrasp(self.name.clone()))?;
        GraspPose::new(
            params,
            self.target(),
            self.target_id(),
            self.grasp.overlap_ratio,
        )
        .map_err(|e| invalid(format!("fixed grasp: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_scene()
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&SceneFile::from_scene(self)).expect("scene serializes");
        text.push('\n');
        text
    }

    /// Names of the scenes shipped with the crate, most constrained first.
    pub const BUILTIN: [&'static str; 4] = ["box_shelf", "box_table", "cylinder_1", "cylinder_2"];

    pub fn builtin(name: &str) -> Result<Self, SceneError> {
        let text = match name {
            "box_shelf" => include_str!("../../scenes/box_shelf.json"),
            "box_table" => include_str!("../../scenes/box_table.json"),
            "cylinder_1" => include_str!("../../scenes/cylinder_1.json"),
            "cylinder_2" => include_str!("../../scenes/cylinder_2.json"),
            _ => return Err(SceneError::UnknownScene(name.to_string())),
        };
        Self::from_json(text)
    }

    /// Whether the scene is one of the two constrained box scenes.
    pub fn is_constrained(name: &str) -> bool {
        matches!(name, "box_shelf" | "box_table")
    }
}

/// Loads a scene file, or a built-in scene when `path` names one and no
/// such file exists.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(name) = path.to_str().filter(|n| Scene::BUILTIN.contains(n)) {
            return Scene::builtin(name);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json(&text)
}

// ---- file format ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arm: Option<ArmFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workspace: Option<Workspace>,
    obstacles: Vec<ObstacleFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<ShapeFile>,
    start_deg: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed_grasp: Option<GraspFile>,
    #[serde(default)]
    grasp: GraspConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmFile {
    link_lengths: Vec<f64>,
    joint_lower_deg: Vec<f64>,
    joint_upper_deg: Vec<f64>,
    #[serde(default)]
    base: [f64; 2],
    #[serde(default)]
    base_deg: f64,
    gripper_standoff: f64,
    link_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum ShapeFile {
    Rect { center: [f64; 2], size: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObstacleFile {
    #[serde(flatten)]
    shape: ShapeFile,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    is_target: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraspFile {
    #[serde(default = "default_side")]
    side: Side,
    #[serde(default)]
    theta_deg: f64,
    #[serde(default)]
    s: f64,
    #[serde(default)]
    alpha_deg: f64,
}

fn default_side() -> Side {
    Side::Right
}

impl ShapeFile {
    fn to_obstacle(&self) -> Obstacle {
        match *self {
            ShapeFile::Rect { center, size } => Obstacle::rect(
                Point::new(center[0], center[1]),
                Point::new(size[0] / 2.0, size[1] / 2.0),
            ),
            ShapeFile::Disc { center, radius } => {
                Obstacle::disc(Point::new(center[0], center[1]), radius)
            }
        }
    }

    fn from_obstacle(o: &Obstacle) -> Self {
        match &o.shape {
            Shape::Rect(r) => ShapeFile::Rect {
                center: [r.center.x, r.center.y],
                size: [r.width(), r.height()],
            },
            Shape::Disc(d) => ShapeFile::Disc {
                center: [d.center.x, d.center.y],
                radius: d.radius,
            },
        }
    }
}

impl SceneFile {
    fn into_scene(self) -> Result<Scene, SceneError> {
        let arm = match &self.arm {
            None => ArmModel::default(),
            Some(a) => ArmModel::new(
                a.link_lengths.clone(),
                a.joint_lower_deg.iter().map(|d| d.to_radians()).collect(),
                a.joint_upper_deg.iter().map(|d| d.to_radians()).collect(),
                PlanarPose::new(a.base[0], a.base[1], a.base_deg.to_radians()),
                a.gripper_standoff,
                a.link_radius,
            )
            .map_err(|e| invalid(format!("arm: {e}")))?,
        };
        let mut obstacles: Vec<Obstacle> = self
            .obstacles
            .iter()
            .map(|o| {
                let mut obs = o.shape.to_obstacle();
                obs.is_target = o.is_target;
                obs
            })
            .collect();
        if let Some(t) = &self.target {
            obstacles.push(t.to_obstacle().as_target());
        }
        if obstacles.iter().filter(|o| o.is_target).count() == 0 {
            return Err(invalid("missing target"));
        }
        let fixed_grasp = self.fixed_grasp.as_ref().map(|g| {
            let standoff = self.grasp.standoff;
            let target_is_disc = obstacles
                .iter()
                .find(|o| o.is_target)
                .is_some_and(|o| matches!(o.shape, Shape::Disc(_)));
            if target_is_disc {
                GraspParams::disc(g.alpha_deg.to_radians(), standoff)
            } else if g.side == Side::Top {
                GraspParams::rect(Side::Top, FRAC_PI_2, g.s, standoff)
            } else {
                GraspParams::rect(g.side, g.theta_deg.to_radians(), g.s, standoff)
            }
        });
        Scene::new(
            self.name,
            arm,
            obstacles,
            JointConfig::new(self.start_deg.iter().map(|d| d.to_radians()).collect()),
            fixed_grasp,
            self.workspace.unwrap_or_default(),
            self.grasp,
        )
    }

    fn from_scene(scene: &Scene) -> Self {
        let arm = (scene.arm != ArmModel::default()).then(|| ArmFile {
            link_lengths: scene.arm.link_lengths().to_vec(),
            joint_lower_deg: scene
                .arm
                .joint_lower()
                .iter()
                .map(|r| r.to_degrees())
                .collect(),
            joint_upper_deg: scene
                .arm
                .joint_upper()
                .iter()
                .map(|r| r.to_degrees())
                .collect(),
            base: [scene.arm.base().x, scene.arm.base().y],
            base_deg: scene.arm.base().phi.to_degrees(),
            gripper_standoff: scene.arm.gripper_standoff(),
            link_radius: scene.arm.link_radius(),
        });
        let target = scene.target();
        let fixed_grasp = scene.fixed_grasp.map(|g| GraspFile {
            side: g.side,
            theta_deg: g.theta.to_degrees(),
            s: g.s,
            alpha_deg: g.alpha.to_degrees(),
        });
        Self {
            name: scene.name.clone(),
            arm,
            workspace: Some(scene.workspace),
            obstacles: scene.obstacles[..scene.target_id()]
                .iter()
                .map(|o| ObstacleFile {
                    shape: ShapeFile::from_obstacle(o),
                    is_target: false,
                })
                .collect(),
            target: Some(ShapeFile::from_obstacle(target)),
            start_deg: scene.start.iter().map(|r| r.to_degrees()).collect(),
            fixed_grasp,
            grasp: scene.grasp,
        }
    }
}
