//! Robot description, scene configuration and tactile layouts.

mod config;
mod taxel;
mod urdf;

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::pose::Pose;
use crate::vision::CameraModel;

pub use config::{parse_scene_config, ObjectShape, ObjectSpec, SceneConfig, SceneFlags, DEFAULT_STEP_SIZE};
pub use taxel::{
    generate_skin_layout, generate_taxel_layout, parse_taxel_layout, read_skin_layout, write_skin_layout,
    write_taxel_layout, SkinLayout,
    SkinPartLayout, Taxel, DEFAULT_RAY_LENGTH, DEFAULT_SKIN_PARTS,
};
pub use urdf::{parse_robot_description, serialize_robot_description};
pub(crate) use config::obj_bounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Child frame relative to the parent link frame at q = 0.
    pub origin: Pose,
    /// Rotation axis in the child frame.
    pub axis: Vector3<f64>,
    pub limit_lo: f64,
    pub limit_hi: f64,
    pub max_velocity: f64,
}

impl Joint {
    pub fn is_actuated(&self) -> bool {
        self.kind == JointKind::Revolute
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.limit_lo, self.limit_hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub origin: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub collision: Vec<Primitive>,
    pub visual_mesh: Option<PathBuf>,
}

/// A validated kinematic tree. Joints are stored in topological order and
/// the joint vector `q` holds one entry per revolute joint in that order.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub cameras: Vec<CameraModel>,
    pub end_effectors: BTreeMap<String, String>,
    root: usize,
    link_index: BTreeMap<String, usize>,
    parent_joint: Vec<Option<usize>>,
    joint_parent: Vec<usize>,
    joint_child: Vec<usize>,
    dof_of_joint: Vec<Option<usize>>,
    actuated: Vec<usize>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        links: Vec<Link>,
        joints: Vec<Joint>,
        cameras: Vec<CameraModel>,
        end_effectors: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut link_index = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate link `{}`", l.name)));
            }
            for p in &l.collision {
                if !p.shape.is_valid() {
                    return Err(Error::Validation(format!(
                        "link `{}` has a non-positive primitive dimension",
                        l.name
                    )));
                }
            }
        }
        if links.is_empty() {
            return Err(Error::Validation("robot has no links".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for j in &joints {
            if !seen.insert(j.name.as_str()) {
                return Err(Error::Validation(format!("duplicate joint `{}`", j.name)));
            }
            for end in [&j.parent, &j.child] {
                if !link_index.contains_key(end) {
                    return Err(Error::Validation(format!(
                        "joint `{}` references undeclared link `{end}`",
                        j.name
                    )));
                }
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("joint `{}` axis is not unit length", j.name)));
            }
            if j.limit_lo > j.limit_hi {
                return Err(Error::Validation(format!("joint `{}` has lower > upper limit", j.name)));
            }
            if j.max_velocity <= 0.0 || !j.max_velocity.is_finite() {
                return Err(Error::Validation(format!(
                    "joint `{}` needs a positive velocity limit",
                    j.name
                )));
            }
        }

        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        for (ji, j) in joints.iter().enumerate() {
            let c = link_index[&j.child];
            if parent_joint[c].is_some() {
                return Err(Error::Validation(format!("link `{}` has two parent joints", j.child)));
            }
            parent_joint[c] = Some(ji);
        }
        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Validation(format!(
                "link graph must have exactly one root, found {}",
                roots.len()
            )));
        }
        let root = roots[0];

        // Stable topological order: keep the declared order where possible.
        let mut placed = vec![false; links.len()];
        placed[root] = true;
        let mut order = Vec::with_capacity(joints.len());
        let mut remaining: Vec<usize> = (0..joints.len()).collect();
        while !remaining.is_empty() {
            let before = remaining.len();
            remaining.retain(|&ji| {
                let p = link_index[&joints[ji].parent];
                if placed[p] {
                    placed[link_index[&joints[ji].child]] = true;
                    order.push(ji);
                    false
                } else {
                    true
                }
            });
            if remaining.len() == before {
                return Err(Error::Validation("link graph contains a cycle".into()));
            }
        }
        let mut slots: Vec<Option<Joint>> = joints.into_iter().map(Some).collect();
        let joints: Vec<Joint> = order.iter().map(|&ji| slots[ji].take().unwrap()).collect();

        let mut parent_joint = vec![None; links.len()];
        let mut joint_parent = Vec::with_capacity(joints.len());
        let mut joint_child = Vec::with_capacity(joints.len());
        let mut dof_of_joint = Vec::with_capacity(joints.len());
        let mut actuated = Vec::new();
        for (ji, j) in joints.iter().enumerate() {
            let c = link_index[&j.child];
            parent_joint[c] = Some(ji);
            joint_parent.push(link_index[&j.parent]);
            joint_child.push(c);
            if j.is_actuated() {
                dof_of_joint.push(Some(actuated.len()));
                actuated.push(ji);
            } else {
                dof_of_joint.push(None);
            }
        }

        for cam in &cameras {
            if !link_index.contains_key(&cam.link) {
                return Err(Error::Validation(format!(
                    "camera `{}` is mounted on undeclared link `{}`",
                    cam.name, cam.link
                )));
            }
            if cam.width == 0 || cam.height == 0 || cam.focal_length <= 0.0 {
                return Err(Error::Validation(format!("camera `{}` has invalid intrinsics", cam.name)));
            }
        }
        for (ee, link) in &end_effectors {
            if !link_index.contains_key(link) {
                return Err(Error::Validation(format!(
                    "end effector `{ee}` refers to undeclared link `{link}`"
                )));
            }
        }

        Ok(Self {
            name: name.into(),
            links,
            joints,
            cameras,
            end_effectors,
            root,
            link_index,
            parent_joint,
            joint_parent,
            joint_child,
            dof_of_joint,
            actuated,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    pub fn link_id(&self, name: &str) -> Result<usize> {
        self.link_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLink(name.to_string()))
    }

    /// Index into the joint vector for a named revolute joint.
    pub fn dof_index(&self, joint: &str) -> Result<usize> {
        self.joints
            .iter()
            .position(|j| j.name == joint)
            .and_then(|ji| self.dof_of_joint[ji])
            .ok_or_else(|| Error::UnknownJoint(joint.to_string()))
    }

    /// Joint index of the `k`-th degree of freedom.
    pub fn actuated_joint(&self, dof: usize) -> &Joint {
        &self.joints[self.actuated[dof]]
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &Joint> + '_ {
        self.actuated.iter().map(move |&ji| &self.joints[ji])
    }

    pub fn dof_of_joint(&self, joint: usize) -> Option<usize> {
        self.dof_of_joint[joint]
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn joint_parent_link(&self, joint: usize) -> usize {
        self.joint_parent[joint]
    }

    pub fn joint_child_link(&self, joint: usize) -> usize {
        self.joint_child[joint]
    }

    /// Joints from the root down to `link`, root first.
    pub fn chain_to(&self, link: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = link;
        while let Some(j) = self.parent_joint[cur] {
            chain.push(j);
            cur = self.joint_parent[j];
        }
        chain.reverse();
        chain
    }

    /// Degrees of freedom on the chain to `link`, in joint-vector order.
    pub fn chain_dofs(&self, link: usize) -> Vec<usize> {
        self.chain_to(link)
            .into_iter()
            .filter_map(|j| self.dof_of_joint[j])
            .collect()
    }

    /// Two links joined directly by a joint.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let joined = |x: usize, y: usize| {
            self.parent_joint[x].is_some_and(|j| self.joint_parent[j] == y)
        };
        joined(a, b) || joined(b, a)
    }

    pub fn camera(&self, name: &str) -> Result<&CameraModel> {
        self.cameras
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownCamera(name.to_string()))
    }

    /// Resolve an end-effector name or a plain link name.
    pub fn end_effector_link(&self, name: &str) -> Result<usize> {
        match self.end_effectors.get(name) {
            Some(link) => self.link_id(link),
            None => self.link_id(name),
        }
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.actuated_joints().map(|j| j.limit_lo).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.actuated_joints().map(|j| j.limit_hi).collect()
    }

    /// Zero posture clamped into the joint limits.
    pub fn neutral_posture(&self) -> Vec<f64> {
        self.actuated_joints().map(|j| j.clamp(0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(name: &str) -> Link {
        Link {
            name: name.into(),
            collision: vec![],
            visual_mesh: None,
        }
    }

    fn revolute(name: &str, parent: &str, child: &str) -> Joint {
        Joint {
            name: name.into(),
            kind: JointKind::Revolute,
            parent: parent.into(),
            child: child.into(),
            origin: Pose::identity(),
            axis: Vector3::z(),
            limit_lo: -1.0,
            limit_hi: 1.0,
            max_velocity: 1.0,
        }
    }

    #[test]
    fn reorders_joints_topologically() {
        let m = RobotModel::new(
            "r",
            vec![link("a"), link("b"), link("c")],
            vec![revolute("j2", "b", "c"), revolute("j1", "a", "b")],
            vec![],
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(m.joints[0].name, "j1");
        assert_eq!(m.dof_index("j2").unwrap(), 1);
        assert_eq!(m.chain_dofs(m.link_id("c").unwrap()), vec![0, 1]);
        assert!(m.adjacent(0, 1));
        assert!(!m.adjacent(0, 2));
    }

    #[test]
    fn rejects_cycles_and_forests() {
        let cyc = RobotModel::new(
            "r",
            vec![link("a"), link("b"), link("c")],
            vec![revolute("j1", "b", "c"), revolute("j2", "c", "b")],
            vec![],
            BTreeMap::new(),
        );
        assert!(matches!(cyc, Err(Error::Validation(_))));
        let forest = RobotModel::new("r", vec![link("a"), link("b")], vec![], vec![], BTreeMap::new());
        assert!(matches!(forest, Err(Error::Validation(_))));
    }
}
