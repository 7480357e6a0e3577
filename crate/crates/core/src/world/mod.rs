//! Simulation state and stepping.
//!
//! The robot is kinematic: commands set joint velocities or set-points and
//! the joints integrate without torque dynamics. Free objects are point-mass
//! spheres/boxes under gravity with impulse contacts against everything else.

mod collision;
mod log;

use std::sync::Arc;

use nalgebra::Vector3;

use crate::control::{CommandStatus, ControlCommand};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Shape};
use crate::kinematics::link_poses;
use crate::model::{ObjectShape, ObjectSpec, RobotModel, SceneConfig, SceneFlags, SkinLayout};
use crate::pose::Pose;
use crate::skin::{SkinModel, SkinState};

pub use collision::detect_collisions;
pub use log::{SimLog, SKIN_FILE, SKIN_HEADER, TRAJECTORY_FILE};

pub const GRAVITY: f64 = 9.81;
/// Tangential velocity factor applied once per step to an object in contact.
pub const TANGENTIAL_DAMPING: f64 = 0.98;
/// Approach speeds below this bounce with zero restitution (resting contact).
pub const RESTING_SPEED: f64 = 0.1;
/// Colour used for robot links in camera images.
pub const ROBOT_COLOR: [u8; 3] = [170, 170, 170];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyId {
    Link(usize),
    Object(usize),
}

impl BodyId {
    pub fn link(self) -> Option<usize> {
        match self {
            BodyId::Link(l) => Some(l),
            BodyId::Object(_) => None,
        }
    }

    pub fn object(self) -> Option<usize> {
        match self {
            BodyId::Object(o) => Some(o),
            BodyId::Link(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collider {
    pub body: BodyId,
    pub shape: Shape,
    pub pose: Pose,
    pub aabb: Aabb,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub body_a: BodyId,
    pub body_b: BodyId,
    pub point: Vector3<f64>,
    /// Unit normal pointing from `body_a` to `body_b`.
    pub normal: Vector3<f64>,
    pub depth: f64,
}

impl Contact {
    pub fn involves(&self, body: BodyId) -> bool {
        self.body_a == body || self.body_b == body
    }

    pub fn is_self_contact(&self) -> bool {
        self.body_a.link().is_some() && self.body_b.link().is_some()
    }

    pub fn is_robot_contact(&self) -> bool {
        self.body_a.link().is_some() || self.body_b.link().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub sim_time: f64,
    pub contacts: Vec<Contact>,
    pub command_status: CommandStatus,
}

/// Kinematic attachment of an object to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment {
    pub link: usize,
    /// Object pose in the link frame.
    pub relative: Pose,
    /// Released once this joint drops below `release_below`.
    pub gripper_dof: Option<usize>,
    pub release_below: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub spec: ObjectSpec,
    pub shape: Shape,
    /// Collision shape placement in the object frame (non-identity for meshes).
    pub shape_offset: Pose,
    pub pose: Pose,
    pub velocity: Vector3<f64>,
    pub attachment: Option<Attachment>,
}

impl ObjectState {
    pub fn collider_pose(&self) -> Pose {
        self.pose.compose(&self.shape_offset)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub(crate) model: Arc<RobotModel>,
    pub(crate) flags: SceneFlags,
    pub(crate) step_size: f64,
    pub(crate) end_effector: usize,
    pub(crate) step_count: u64,
    pub(crate) q: Vec<f64>,
    pub(crate) q_dot: Vec<f64>,
    pub(crate) rest_posture: Vec<f64>,
    pub(crate) objects: Vec<ObjectState>,
    pub(crate) command: Option<ControlCommand>,
    pub(crate) command_status: CommandStatus,
    pub(crate) link_poses: Vec<Pose>,
    prev_link_poses: Vec<Pose>,
    link_primitives: Vec<(usize, usize)>,
    colliders: Vec<Collider>,
    pub(crate) skin: Option<SkinModel>,
    skin_state: SkinState,
    log: Option<SimLog>,
    contacts: Vec<Contact>,
    pacing: Option<Pacing>,
    grippers: Vec<Gripper>,
}

/// Wall-clock throttling for [`World::step`].
#[derive(Debug, Clone, Copy)]
struct Pacing {
    period: f64,
    last: Option<std::time::Instant>,
}

/// A hand whose revolute `*gripper` joint moves a finger against the
/// palm's other children.
#[derive(Debug, Clone, PartialEq)]
struct Gripper {
    palm: usize,
    finger: usize,
    dof: usize,
    /// Links that oppose the finger (palm and its other children).
    opposing: Vec<usize>,
}

/// Grasped objects are released once the gripper opens this far (rad)
/// beyond the angle it had at attachment.
pub const GRASP_RELEASE_OPENING: f64 = 0.1;
/// Contact normals on opposite sides of an object have a dot product below this.
pub const GRASP_OPPOSING_DOT: f64 = -0.5;

impl World {
    /// Build a world from a validated scene config. `skin` is required when
    /// the config enables the skin.
    pub fn new(model: Arc<RobotModel>, config: &SceneConfig, skin: Option<SkinLayout>) -> Result<Self> {
        config.validate(&model)?;
        let q = config.initial_q(&model)?;
        let end_effector = model.end_effector_link(&config.end_effector)?;
        let skin = if config.flags.skin {
            let layout = skin.unwrap_or_default();
            Some(SkinModel::new(&model, &layout)?)
        } else {
            None
        };
        let link_primitives = model
            .links
            .iter()
            .enumerate()
            .flat_map(|(l, link)| (0..link.collision.len()).map(move |p| (l, p)))
            .collect();
        let poses = link_poses(&model, &q)?;
        let dof = model.dof();
        let grippers = find_grippers(&model);
        let mut world = Self {
            log: config.flags.log.then(SimLog::default),
            model,
            flags: config.flags,
            step_size: config.step_size,
            end_effector,
            step_count: 0,
            rest_posture: q.clone(),
            q,
            q_dot: vec![0.0; dof],
            objects: Vec::new(),
            command: None,
            command_status: CommandStatus::None,
            prev_link_poses: poses.clone(),
            link_poses: poses,
            link_primitives,
            colliders: Vec::new(),
            skin,
            skin_state: SkinState::default(),
            contacts: Vec::new(),
            pacing: None,
            grippers,
        };
        for spec in &config.objects {
            world.add_object(spec.clone())?;
        }
        world.rebuild_colliders();
        if world.flags.skin {
            world.skin_state = crate::skin::compute_skin_activations(&world)?;
        }
        Ok(world)
    }

    /// Throttle [`World::step`] to `factor` times real time; 0 disables.
    pub fn set_realtime_factor(&mut self, factor: f64) {
        self.pacing = (factor > 0.0).then(|| Pacing {
            period: self.step_size / factor,
            last: None,
        });
    }

    /// One step, throttled through [`World::step_if_elapsed`] when a
    /// realtime factor is set. Pacing never changes simulation results.
    pub fn step(&mut self) {
        let Some(p) = self.pacing else {
            self.update_simulation();
            return;
        };
        let Some(last) = p.last else {
            self.update_simulation();
            self.pacing.as_mut().unwrap().last = Some(std::time::Instant::now());
            return;
        };
        loop {
            let elapsed = last.elapsed().as_secs_f64();
            if self.step_if_elapsed(elapsed, p.period) {
                break;
            }
            std::thread::sleep(std::time::Duration::from_secs_f64(p.period - elapsed));
        }
        self.pacing.as_mut().unwrap().last = Some(std::time::Instant::now());
    }

    pub fn active_command(&self) -> Option<&ControlCommand> {
        self.command.as_ref()
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<RobotModel> {
        Arc::clone(&self.model)
    }

    pub fn flags(&self) -> SceneFlags {
        self.flags
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn sim_time(&self) -> f64 {
        self.step_count as f64 * self.step_size
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_dot(&self) -> &[f64] {
        &self.q_dot
    }

    pub fn rest_posture(&self) -> &[f64] {
        &self.rest_posture
    }

    pub fn end_effector(&self) -> usize {
        self.end_effector
    }

    pub fn set_end_effector(&mut self, name: &str) -> Result<()> {
        self.end_effector = self.model.end_effector_link(name)?;
        Ok(())
    }

    pub fn link_pose(&self, link: usize) -> Pose {
        self.link_poses[link]
    }

    pub fn link_poses(&self) -> &[Pose] {
        &self.link_poses
    }

    pub fn colliders(&self) -> &[Collider] {
        &self.colliders
    }

    pub fn objects(&self) -> &[ObjectState] {
        &self.objects
    }

    pub fn object(&self, id: usize) -> &ObjectState {
        &self.objects[id]
    }

    pub fn object_id(&self, name: &str) -> Result<usize> {
        self.objects
            .iter()
            .position(|o| o.spec.name == name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    pub fn body_name(&self, body: BodyId) -> &str {
        match body {
            BodyId::Link(l) => &self.model.links[l].name,
            BodyId::Object(o) => &self.objects[o].spec.name,
        }
    }

    pub fn command_status(&self) -> CommandStatus {
        self.command_status
    }

    pub fn skin_state(&self) -> &SkinState {
        &self.skin_state
    }

    pub fn skin_model(&self) -> Option<&SkinModel> {
        self.skin.as_ref()
    }

    /// Contacts found by the most recent step.
    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    /// Start recording trajectory and skin logs if the config did not.
    pub fn enable_log(&mut self) {
        self.flags.log = true;
        if self.log.is_none() {
            self.log = Some(SimLog::default());
        }
    }

    pub fn log(&self) -> Option<&SimLog> {
        self.log.as_ref()
    }

    pub fn take_log(&mut self) -> Option<SimLog> {
        self.log.take()
    }

    pub fn add_object(&mut self, spec: ObjectSpec) -> Result<usize> {
        spec.validate()?;
        if self.objects.iter().any(|o| o.spec.name == spec.name) {
            return Err(Error::DuplicateObject(spec.name));
        }
        let (shape, shape_offset) = match &spec.shape {
            ObjectShape::Sphere { radius } => (Shape::Sphere { radius: *radius }, Pose::identity()),
            ObjectShape::Box { half_extents } => (
                Shape::Box {
                    half_extents: *half_extents,
                },
                Pose::identity(),
            ),
            ObjectShape::Mesh { file } => {
                let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
                let (lo, hi) = crate::model::obj_bounds(&text)?;
                let half = ((hi - lo) * 0.5).map(|h| h.max(1e-4));
                (
                    Shape::Box { half_extents: half },
                    Pose::from_translation((lo + hi) * 0.5),
                )
            }
        };
        let id = self.objects.len();
        self.objects.push(ObjectState {
            pose: spec.pose,
            spec,
            shape,
            shape_offset,
            velocity: Vector3::zeros(),
            attachment: None,
        });
        self.rebuild_colliders();
        Ok(id)
    }

    /// Teleport an object (scripted motion); its velocity is zeroed.
    pub fn set_object_pose(&mut self, id: usize, pose: Pose) {
        self.objects[id].pose = pose;
        self.objects[id].velocity = Vector3::zeros();
        self.rebuild_colliders();
    }

    pub fn set_object_velocity(&mut self, id: usize, v: Vector3<f64>) {
        self.objects[id].velocity = v;
    }

    /// Rigidly attach an object to a link at their current relative pose.
    pub fn attach(&mut self, object: usize, link: usize, gripper_dof: Option<usize>, release_below: f64) {
        let relative = self.link_poses[link].inverse().compose(&self.objects[object].pose);
        self.objects[object].attachment = Some(Attachment {
            link,
            relative,
            gripper_dof,
            release_below,
        });
        self.objects[object].velocity = Vector3::zeros();
    }

    pub fn detach(&mut self, object: usize) {
        self.objects[object].attachment = None;
    }

    /// Set the joint vector directly (clamped to limits); used for scripted
    /// setups. Velocities are zeroed.
    pub fn set_q(&mut self, q: &[f64]) -> Result<()> {
        if q.len() != self.model.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dof(),
                got: q.len(),
            });
        }
        for (d, v) in q.iter().enumerate() {
            self.q[d] = self.model.actuated_joint(d).clamp(*v);
        }
        self.q_dot.iter_mut().for_each(|v| *v = 0.0);
        self.link_poses = link_poses(&self.model, &self.q)?;
        self.prev_link_poses = self.link_poses.clone();
        self.rebuild_colliders();
        self.refresh_skin();
        Ok(())
    }

    fn rebuild_colliders(&mut self) {
        self.colliders.clear();
        for &(l, p) in &self.link_primitives {
            let prim = &self.model.links[l].collision[p];
            let pose = self.link_poses[l].compose(&prim.origin);
            self.colliders.push(Collider {
                body: BodyId::Link(l),
                shape: prim.shape,
                aabb: prim.shape.aabb(&pose),
                pose,
                color: ROBOT_COLOR,
            });
        }
        for (i, o) in self.objects.iter().enumerate() {
            let pose = o.collider_pose();
            self.colliders.push(Collider {
                body: BodyId::Object(i),
                shape: o.shape,
                aabb: o.shape.aabb(&pose),
                pose,
                color: o.spec.color,
            });
        }
    }

    fn refresh_skin(&mut self) {
        if self.flags.skin {
            // Total for an enabled skin.
            self.skin_state = crate::skin::compute_skin_activations(self).unwrap_or_default();
        }
    }

    /// Velocity of a point rigidly attached to `body`, from the pose change
    /// over the last step.
    fn point_velocity(&self, body: BodyId, point: &Vector3<f64>) -> Vector3<f64> {
        match body {
            BodyId::Link(l) => {
                let delta = self.link_poses[l].compose(&self.prev_link_poses[l].inverse());
                let before = delta.inverse().transform_point(point);
                (point - before) / self.step_size
            }
            BodyId::Object(o) => self.objects[o].velocity,
        }
    }

    fn is_free(&self, body: BodyId) -> bool {
        body.object()
            .is_some_and(|o| self.objects[o].spec.dynamic && self.objects[o].attachment.is_none())
    }

    /// Advance the simulation by one step.
    pub fn update_simulation(&mut self) -> StepReport {
        let h = self.step_size;
        self.prev_link_poses.clone_from(&self.link_poses);

        crate::control::integrate_joints(self);
        self.link_poses = link_poses(&self.model, &self.q).expect("joint vector has model dimension");

        // Attachments follow their link; an opened gripper lets go.
        for i in 0..self.objects.len() {
            let Some(att) = self.objects[i].attachment else { continue };
            if let Some(d) = att.gripper_dof {
                if self.q[d] < att.release_below {
                    self.objects[i].attachment = None;
                    continue;
                }
            }
            let pose = self.link_poses[att.link].compose(&att.relative);
            self.objects[i].velocity = (pose.position - self.objects[i].pose.position) / h;
            self.objects[i].pose = pose;
        }

        // Semi-implicit Euler: velocity first, then position.
        for o in self.objects.iter_mut() {
            if o.spec.dynamic && o.attachment.is_none() {
                o.velocity.z -= GRAVITY * h;
                o.pose.position += o.velocity * h;
            }
        }
        self.rebuild_colliders();

        let contacts = detect_collisions(self);
        self.resolve_contacts(&contacts);
        self.check_grasps(&contacts);
        self.rebuild_colliders();

        crate::control::update_command_status(self, &contacts);

        self.step_count += 1;
        self.refresh_skin();
        if let Some(mut log) = self.log.take() {
            log.record(self);
            self.log = Some(log);
        }
        self.contacts.clone_from(&contacts);
        StepReport {
            sim_time: self.sim_time(),
            contacts,
            command_status: self.command_status,
        }
    }

    fn resolve_contacts(&mut self, contacts: &[Contact]) {
        let mut damped = vec![false; self.objects.len()];
        for c in contacts {
            let free_a = self.is_free(c.body_a);
            let free_b = self.is_free(c.body_b);
            if !free_a && !free_b {
                continue;
            }
            let inv_mass = |w: &World, b: BodyId, free: bool| {
                if free {
                    1.0 / w.objects[b.object().unwrap()].spec.mass
                } else {
                    0.0
                }
            };
            let wa = inv_mass(self, c.body_a, free_a);
            let wb = inv_mass(self, c.body_b, free_b);
            let wsum = wa + wb;
            let va = self.point_velocity(c.body_a, &c.point);
            let vb = self.point_velocity(c.body_b, &c.point);
            // Positive when B moves away from A along the normal.
            let rel = vb - va;
            let vn = rel.dot(&c.normal);
            let restitution = {
                let e = |b: BodyId| b.object().map(|o| self.objects[o].spec.restitution);
                match (e(c.body_a), e(c.body_b)) {
                    (Some(x), Some(y)) => 0.5 * (x + y),
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => 0.0,
                }
            };
            if vn < 0.0 {
                let e = if -vn < RESTING_SPEED { 0.0 } else { restitution };
                let j = -(1.0 + e) * vn / wsum;
                for (body, w, sign) in [(c.body_a, wa, -1.0), (c.body_b, wb, 1.0)] {
                    if w > 0.0 {
                        let o = body.object().unwrap();
                        self.objects[o].velocity += c.normal * (sign * j * w);
                    }
                }
            }
            for (body, w, other) in [(c.body_a, wa, c.body_b), (c.body_b, wb, c.body_a)] {
                if w <= 0.0 {
                    continue;
                }
                let o = body.object().unwrap();
                if !damped[o] {
                    damped[o] = true;
                    let v_other = self.point_velocity(other, &c.point);
                    let rel = self.objects[o].velocity - v_other;
                    let tangential = rel - c.normal * rel.dot(&c.normal);
                    self.objects[o].velocity -= tangential * (1.0 - TANGENTIAL_DAMPING);
                }
            }
            // Positional projection along the normal, split by inverse mass.
            let sign_a = -1.0;
            if free_a {
                let o = c.body_a.object().unwrap();
                self.objects[o].pose.position += c.normal * (sign_a * c.depth * wa / wsum);
            }
            if free_b {
                let o = c.body_b.object().unwrap();
                self.objects[o].pose.position += c.normal * (c.depth * wb / wsum);
            }
        }
    }

    /// Attach a free object held between a finger and an opposing link.
    fn check_grasps(&mut self, contacts: &[Contact]) {
        for g in 0..self.grippers.len() {
            let gr = self.grippers[g].clone();
            for o in 0..self.objects.len() {
                if !self.is_free(BodyId::Object(o)) {
                    continue;
                }
                // Normals pointing from the robot link into the object.
                let pushes = |links: &[usize]| -> Vec<Vector3<f64>> {
                    contacts
                        .iter()
                        .filter_map(|c| match (c.body_a, c.body_b) {
                            (BodyId::Link(l), b) if b == BodyId::Object(o) && links.contains(&l) => Some(c.normal),
                            (a, BodyId::Link(l)) if a == BodyId::Object(o) && links.contains(&l) => Some(-c.normal),
                            _ => None,
                        })
                        .collect()
                };
                let finger = pushes(&[gr.finger]);
                let other = pushes(&gr.opposing);
                let opposed = finger
                    .iter()
                    .any(|a| other.iter().any(|b| a.dot(b) < GRASP_OPPOSING_DOT));
                if opposed {
                    let (palm, dof) = (gr.palm, gr.dof);
                    let release = self.q[dof] - GRASP_RELEASE_OPENING;
                    self.attach(o, palm, Some(dof), release);
                }
            }
        }
    }

    /// Step only if at least `min_period` seconds passed since the last step.
    pub fn step_if_elapsed(&mut self, elapsed_since_last_step: f64, min_period: f64) -> bool {
        if elapsed_since_last_step >= min_period {
            self.update_simulation();
            true
        } else {
            false
        }
    }

    /// World-frame AABB of every collider belonging to a link.
    pub fn link_aabb(&self, link: usize) -> Aabb {
        self.colliders
            .iter()
            .filter(|c| c.body == BodyId::Link(link))
            .fold(Aabb::empty(), |acc, c| acc.union(&c.aabb))
    }
}

fn find_grippers(model: &RobotModel) -> Vec<Gripper> {
    model
        .joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.is_actuated() && j.name.ends_with("gripper"))
        .map(|(ji, _)| {
            let palm = model.joint_parent_link(ji);
            let finger = model.joint_child_link(ji);
            let opposing = std::iter::once(palm)
                .chain(
                    (0..model.joints.len())
                        .filter(|&k| k != ji && model.joint_parent_link(k) == palm)
                        .map(|k| model.joint_child_link(k)),
                )
                .filter(|&l| !model.links[l].collision.is_empty())
                .collect();
            Gripper {
                palm,
                finger,
                dof: model.dof_of_joint(ji).unwrap(),
                opposing,
            }
        })
        .collect()
}
