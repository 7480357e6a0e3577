//! Scene configuration: a strict YAML subset.
//!
//! ```yaml
//! gui: false               # accepted and ignored (headless)
//! skin: true
//! eyes: true
//! log: false
//! self_collisions: true
//! robot: humanoid.urdf     # optional, relative to the asset directory
//! skin_layout: skin        # optional directory of *.taxels files
//! step_size: 0.004166666666666667
//! end_effector: right_hand
//! initial_joints:
//!   r_elbow: 0.3
//! objects:
//!   - name: ball
//!     shape: sphere        # sphere | box | mesh
//!     radius: 0.03         # sphere
//!     size: [0.4, 0.8, 0.05]   # box, full extents
//!     file: cup.obj        # mesh, collides as its bounding box
//!     position: [0.3, 0.0, 0.03]
//!     orientation: [0, 0, 0]   # roll pitch yaw
//!     color: [0, 200, 0]
//!     dynamic: true
//!     mass: 0.1
//!     restitution: 0.5
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::Vector3;
use serde::Deserialize;

use super::RobotModel;
use crate::error::{Error, Result};
use crate::pose::Pose;

pub const DEFAULT_STEP_SIZE: f64 = 1.0 / 240.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneFlags {
    pub skin: bool,
    pub eyes: bool,
    pub log: bool,
    pub self_collisions: bool,
}

impl Default for SceneFlags {
    fn default() -> Self {
        Self {
            skin: true,
            eyes: true,
            log: false,
            self_collisions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectShape {
    Sphere { radius: f64 },
    Box { half_extents: Vector3<f64> },
    /// Triangle mesh; collides as the bounding box of its vertices.
    Mesh { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    pub shape: ObjectShape,
    pub pose: Pose,
    pub color: [u8; 3],
    pub dynamic: bool,
    pub mass: f64,
    pub restitution: f64,
}

impl ObjectSpec {
    pub fn sphere(name: &str, radius: f64, position: Vector3<f64>) -> Self {
        Self {
            name: name.into(),
            shape: ObjectShape::Sphere { radius },
            pose: Pose::from_translation(position),
            color: [200, 200, 200],
            dynamic: false,
            mass: 1.0,
            restitution: 0.5,
        }
    }

    pub fn cuboid(name: &str, half_extents: Vector3<f64>, position: Vector3<f64>) -> Self {
        Self {
            shape: ObjectShape::Box { half_extents },
            ..Self::sphere(name, 1.0, position)
        }
    }

    pub fn with_dynamic(mut self, mass: f64) -> Self {
        self.dynamic = true;
        self.mass = mass;
        self
    }

    pub fn with_color(mut self, color: [u8; 3]) -> Self {
        self.color = color;
        self
    }

    pub fn with_restitution(mut self, e: f64) -> Self {
        self.restitution = e;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dynamic && !(self.mass > 0.0) {
            return Err(Error::Config(format!("object `{}`: dynamic objects need mass > 0", self.name)));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::Config(format!("object `{}`: restitution must lie in [0, 1]", self.name)));
        }
        let ok = match &self.shape {
            ObjectShape::Sphere { radius } => *radius > 0.0,
            ObjectShape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            ObjectShape::Mesh { .. } => true,
        };
        if !ok {
            return Err(Error::Config(format!("object `{}`: dimensions must be positive", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub flags: SceneFlags,
    pub initial_joint_positions: BTreeMap<String, f64>,
    pub end_effector: String,
    pub step_size: f64,
    pub objects: Vec<ObjectSpec>,
    pub robot: Option<PathBuf>,
    pub skin_layout: Option<PathBuf>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            flags: SceneFlags::default(),
            initial_joint_positions: BTreeMap::new(),
            end_effector: "right_hand".into(),
            step_size: DEFAULT_STEP_SIZE,
            objects: Vec::new(),
            robot: None,
            skin_layout: None,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScene {
    gui: Option<bool>,
    skin: Option<bool>,
    eyes: Option<bool>,
    log: Option<bool>,
    self_collisions: Option<bool>,
    robot: Option<PathBuf>,
    skin_layout: Option<PathBuf>,
    #[serde(default)]
    initial_joints: BTreeMap<String, f64>,
    end_effector: Option<String>,
    step_size: Option<f64>,
    #[serde(default)]
    objects: Vec<RawObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    shape: String,
    radius: Option<f64>,
    size: Option<[f64; 3]>,
    file: Option<PathBuf>,
    #[serde(default)]
    position: [f64; 3],
    #[serde(default)]
    orientation: [f64; 3],
    color: Option<[u8; 3]>,
    #[serde(default)]
    dynamic: bool,
    mass: Option<f64>,
    restitution: Option<f64>,
}

impl RawObject {
    fn into_spec(self) -> Result<ObjectSpec> {
        let missing = |key: &str| Error::Config(format!("object `{}` needs `{key}`", self.name));
        let shape = match self.shape.as_str() {
            "sphere" => ObjectShape::Sphere {
                radius: self.radius.ok_or_else(|| missing("radius"))?,
            },
            "box" => {
                let s = self.size.ok_or_else(|| missing("size"))?;
                ObjectShape::Box {
                    half_extents: Vector3::new(s[0], s[1], s[2]) * 0.5,
                }
            }
            "mesh" => ObjectShape::Mesh {
                file: self.file.clone().ok_or_else(|| missing("file"))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "object `{}`: unknown shape `{other}` (sphere, box, mesh)",
                    self.name
                )))
            }
        };
        let spec = ObjectSpec {
            name: self.name,
            shape,
            pose: Pose::from_xyz_rpy(self.position, self.orientation),
            color: self.color.unwrap_or([200, 200, 200]),
            dynamic: self.dynamic,
            mass: self.mass.unwrap_or(1.0),
            restitution: self.restitution.unwrap_or(0.5),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SceneConfig {
    /// Syntax-level parse; joint names are checked by [`SceneConfig::validate`].
    pub fn from_yaml(text: &str) -> Result<Self> {
        let raw: RawScene = if text.trim().is_empty() {
            RawScene::default()
        } else {
            serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        let _ = raw.gui;
        let defaults = SceneFlags::default();
        let step_size = raw.step_size.unwrap_or(DEFAULT_STEP_SIZE);
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {step_size}")));
        }
        let mut names = std::collections::BTreeSet::new();
        let mut objects = Vec::with_capacity(raw.objects.len());
        for o in raw.objects {
            if !names.insert(o.name.clone()) {
                return Err(Error::Config(format!("duplicate object name `{}`", o.name)));
            }
            objects.push(o.into_spec()?);
        }
        Ok(Self {
            flags: SceneFlags {
                skin: raw.skin.unwrap_or(defaults.skin),
                eyes: raw.eyes.unwrap_or(defaults.eyes),
                log: raw.log.unwrap_or(defaults.log),
                self_collisions: raw.self_collisions.unwrap_or(defaults.self_collisions),
            },
            initial_joint_positions: raw.initial_joints,
            end_effector: raw.end_effector.unwrap_or_else(|| "right_hand".into()),
            step_size,
            objects,
            robot: raw.robot,
            skin_layout: raw.skin_layout,
        })
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        for (name, &q) in &self.initial_joint_positions {
            let dof = model.dof_index(name)?;
            let j = model.actuated_joint(dof);
            if q < j.limit_lo || q > j.limit_hi {
                return Err(Error::Config(format!(
                    "initial position {q} of joint `{name}` is outside [{}, {}]",
                    j.limit_lo, j.limit_hi
                )));
            }
        }
        model.end_effector_link(&self.end_effector).map_err(|_| {
            Error::Config(format!("end effector `{}` is not a link or named end effector", self.end_effector))
        })?;
        Ok(())
    }

    /// Initial joint vector: model neutral posture overridden by the config.
    pub fn initial_q(&self, model: &RobotModel) -> Result<Vec<f64>> {
        let mut q = model.neutral_posture();
        for (name, &v) in &self.initial_joint_positions {
            q[model.dof_index(name)?] = v;
        }
        Ok(q)
    }
}

pub fn parse_scene_config(text: &str, model: &RobotModel) -> Result<SceneConfig> {
    let cfg = SceneConfig::from_yaml(text)?;
    cfg.validate(model)?;
    Ok(cfg)
}

/// Bounding box (min, max) of the `v` records of a Wavefront OBJ file.
pub(crate) fn obj_bounds(text: &str) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    let mut any = false;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let mut p = Vector3::zeros();
        for k in 0..3 {
            p[k] = it
                .next()
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad OBJ vertex `{line}`")))?;
        }
        lo = lo.inf(&p);
        hi = hi.sup(&p);
        any = true;
    }
    if !any {
        return Err(Error::Parse("OBJ file has no vertices".into()));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = SceneConfig::from_yaml("").unwrap();
        assert!(c.flags.skin && c.flags.eyes && c.flags.self_collisions);
        assert!(!c.flags.log);
        assert_eq!(c.step_size, 1.0 / 240.0);
        assert!(c.objects.is_empty());
    }

    #[test]
    fn unknown_key_fails_loudly() {
        let err = SceneConfig::from_yaml("skinn: true\n").unwrap_err();
        assert!(err.to_string().contains("skinn"), "{err}");
        let err = SceneConfig::from_yaml("objects:\n  - {name: a, shape: sphere, radius: 1, colour: [1,2,3]}\n")
            .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn objects_parse() {
        let c = SceneConfig::from_yaml(
            "gui: true\nobjects:\n  - name: table\n    shape: box\n    size: [0.4, 0.8, 0.05]\n    position: [0.4, 0, -0.025]\n  - name: ball\n    shape: sphere\n    radius: 0.03\n    dynamic: true\n    mass: 0.1\n    color: [0, 200, 0]\n",
        )
        .unwrap();
        assert_eq!(c.objects.len(), 2);
        assert_eq!(
            c.objects[0].shape,
            ObjectShape::Box {
                half_extents: Vector3::new(0.2, 0.4, 0.025)
            }
        );
        assert!(!c.objects[0].dynamic);
        assert!(c.objects[1].dynamic);
        assert_eq!(c.objects[1].color, [0, 200, 0]);
    }

    #[test]
    fn malformed_values() {
        assert!(SceneConfig::from_yaml("step_size: -1\n").is_err());
        assert!(SceneConfig::from_yaml("skin: maybe\n").is_err());
        assert!(SceneConfig::from_yaml("objects:\n  - {name: a, shape: cone}\n").is_err());
        assert!(SceneConfig::from_yaml("objects:\n  - {name: a, shape: sphere, radius: 1, restitution: 2}\n").is_err());
    }

    #[test]
    fn obj_bounds_reads_vertices() {
        let (lo, hi) = obj_bounds("# cube\nv 0 0 0\nv 1 2 3\nvn 0 0 1\nf 1 2 1\n").unwrap();
        assert_eq!(lo, Vector3::zeros());
        assert_eq!(hi, Vector3::new(1.0, 2.0, 3.0));
    }
}
