//! Robot commands: joint velocity, joint position, Cartesian targets and
//! waypoint following, plus resolved-rate control, gaze geometry and touch
//! clustering.
//!
//! Commands are queued on the [`World`] and executed by
//! [`World::update_simulation`]; the `wait` option steps the world until the
//! motion finishes.

mod gaze;
mod rrmc;
mod touch;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kinematics::{solve_ik_dls_link, IkParams, IkStatus};
use crate::pose::Pose;
use crate::world::{Contact, World};

pub use gaze::{gaze_angle, gaze_plane_decomposition};
pub use rrmc::{rrmc, RrmcMethod};
pub use touch::{cluster_touches, TouchEvent};

/// A position motion is done once every joint is this close to its target.
pub const POSITION_TOLERANCE: f64 = 1e-4;
/// Non-converged IK is still accepted below this multiple of the tolerances.
pub const IK_ACCEPT_FACTOR: f64 = 10.0;

/// Six-vector (vx, vy, vz, wx, wy, wz).
pub type CartesianVelocity = nalgebra::Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommandStatus {
    #[default]
    None,
    Running,
    Done,
    StoppedOnCollision,
}

impl CommandStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, CommandStatus::Done | CommandStatus::StoppedOnCollision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionOptions {
    /// Step the world until the motion is terminal.
    pub wait: bool,
    pub stop_on_collision: bool,
    /// Also stop on self-contacts (requires self-collision detection).
    pub check_self_collision: bool,
    /// Simulated seconds before a waiting call gives up.
    pub timeout: f64,
}

impl Default for MotionOptions {
    fn default() -> Self {
        Self {
            wait: false,
            stop_on_collision: false,
            check_self_collision: false,
            timeout: 10.0,
        }
    }
}

impl MotionOptions {
    pub fn waiting() -> Self {
        Self {
            wait: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
/// The command the world executes each step.
pub enum ControlCommand {
    Velocity(Vec<f64>),
    Position {
        targets: Vec<f64>,
        options: MotionOptions,
    },
    Waypoints {
        link: usize,
        positions: Vec<Vector3<f64>>,
        targets: Vec<Vec<f64>>,
        index: usize,
        switch_radius: f64,
        options: MotionOptions,
    },
    Hold,
}

impl ControlCommand {
    fn options(&self) -> Option<&MotionOptions> {
        match self {
            ControlCommand::Position { options, .. } | ControlCommand::Waypoints { options, .. } => Some(options),
            _ => None,
        }
    }

    fn targets(&self) -> Option<&[f64]> {
        match self {
            ControlCommand::Position { targets, .. } => Some(targets),
            ControlCommand::Waypoints { targets, index, .. } => Some(&targets[*index]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionState {
    Running,
    Done,
    StoppedOnCollision,
    Rejected,
}

/// Result of issuing a command. `Rejected` leaves the world untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionStatus {
    pub state: MotionState,
    pub detail: String,
}

impl MotionStatus {
    fn rejected(detail: String) -> Self {
        Self {
            state: MotionState::Rejected,
            detail,
        }
    }

    fn from_world(world: &World) -> Self {
        let state = match world.command_status() {
            CommandStatus::Done => MotionState::Done,
            CommandStatus::StoppedOnCollision => MotionState::StoppedOnCollision,
            CommandStatus::Running | CommandStatus::None => MotionState::Running,
        };
        Self {
            state,
            detail: String::new(),
        }
    }

    pub fn is_rejected(&self) -> bool {
        self.state == MotionState::Rejected
    }
}

fn dofs_for(world: &World, joints: &[&str], values: &[f64]) -> Result<Vec<usize>> {
    if joints.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: joints.len(),
            got: values.len(),
        });
    }
    joints.iter().map(|j| world.model().dof_index(j)).collect()
}

/// Constant joint velocities (rad/s) for the named joints; all others stop.
/// The command persists until replaced; joints hold at their limits.
pub fn move_velocity(world: &mut World, joints: &[&str], velocities: &[f64]) -> Result<MotionStatus> {
    let dofs = dofs_for(world, joints, velocities)?;
    let mut v = vec![0.0; world.model().dof()];
    for (&d, &val) in dofs.iter().zip(velocities) {
        v[d] = val;
    }
    set_velocity(world, v)
}

/// Full joint-velocity vector variant of [`move_velocity`].
pub fn set_velocity(world: &mut World, v: Vec<f64>) -> Result<MotionStatus> {
    if v.len() != world.model().dof() {
        return Err(Error::DimensionMismatch {
            expected: world.model().dof(),
            got: v.len(),
        });
    }
    for (d, val) in v.iter().enumerate() {
        let j = world.model().actuated_joint(d);
        if !val.is_finite() || val.abs() > j.max_velocity {
            return Ok(MotionStatus::rejected(format!(
                "velocity {val} for joint `{}` exceeds {} rad/s",
                j.name, j.max_velocity
            )));
        }
    }
    world.command = Some(ControlCommand::Velocity(v));
    world.command_status = CommandStatus::Running;
    Ok(MotionStatus::from_world(world))
}

/// Drive the named joints to `targets` at their maximum velocity; other
/// joints hold their current position.
pub fn move_position(world: &mut World, joints: &[&str], targets: &[f64], options: MotionOptions) -> Result<MotionStatus> {
    let dofs = dofs_for(world, joints, targets)?;
    let mut full = world.q().to_vec();
    for (&d, &t) in dofs.iter().zip(targets) {
        full[d] = t;
    }
    move_joints(world, full, options)
}

/// Full joint-vector variant of [`move_position`].
pub fn move_joints(world: &mut World, targets: Vec<f64>, options: MotionOptions) -> Result<MotionStatus> {
    if targets.len() != world.model().dof() {
        return Err(Error::DimensionMismatch {
            expected: world.model().dof(),
            got: targets.len(),
        });
    }
    for (d, t) in targets.iter().enumerate() {
        let j = world.model().actuated_joint(d);
        if !(j.limit_lo..=j.limit_hi).contains(t) {
            return Ok(MotionStatus::rejected(format!(
                "target {t} for joint `{}` is outside [{}, {}]",
                j.name, j.limit_lo, j.limit_hi
            )));
        }
    }
    world.command = Some(ControlCommand::Position { targets, options });
    world.command_status = CommandStatus::Running;
    finish(world, options)
}

fn solve_for(world: &World, link: usize, seed: &[f64], target: &Pose) -> Result<std::result::Result<Vec<f64>, String>> {
    let params = IkParams::default().with_rest(world.rest_posture().to_vec());
    let r = solve_ik_dls_link(world.model(), seed, link, target, &params)?;
    let ok = r.status == IkStatus::Converged
        || r.within(IK_ACCEPT_FACTOR * params.tol_pos, IK_ACCEPT_FACTOR * params.tol_rot);
    Ok(if ok {
        Ok(r.q)
    } else {
        Err(format!(
            "IK failed ({:?}): residual {:.4} m / {:.4} rad",
            r.status, r.residual.0, r.residual.1
        ))
    })
}

/// Move the current end effector to `target` through an IK solution seeded
/// from the current posture. There is no path or reachability planning; a
/// failed IK is rejected before any motion.
pub fn move_cartesian(world: &mut World, target: &Pose, options: MotionOptions) -> Result<MotionStatus> {
    match solve_for(world, world.end_effector(), world.q(), target)? {
        Ok(q) => move_joints(world, q, options),
        Err(msg) => Ok(MotionStatus::rejected(msg)),
    }
}

/// Visit `waypoints` in order with the end effector, switching to the next
/// one as soon as it comes within `switch_radius` of the current one.
pub fn follow_waypoints(
    world: &mut World,
    waypoints: &[Pose],
    switch_radius: f64,
    options: MotionOptions,
) -> Result<MotionStatus> {
    if waypoints.is_empty() {
        return Err(Error::InvalidParams("no waypoints".into()));
    }
    if !(switch_radius > 0.0) {
        return Err(Error::InvalidParams("switch_radius must be positive".into()));
    }
    let link = world.end_effector();
    let mut seed = world.q().to_vec();
    let mut targets = Vec::with_capacity(waypoints.len());
    for (k, wp) in waypoints.iter().enumerate() {
        match solve_for(world, link, &seed, wp)? {
            Ok(q) => {
                seed.clone_from(&q);
                targets.push(q);
            }
            Err(msg) => return Ok(MotionStatus::rejected(format!("waypoint {k}: {msg}"))),
        }
    }
    world.command = Some(ControlCommand::Waypoints {
        link,
        positions: waypoints.iter().map(|w| w.position).collect(),
        targets,
        index: 0,
        switch_radius,
        options,
    });
    world.command_status = CommandStatus::Running;
    advance_waypoints(world);
    finish(world, options)
}

/// Stop all joints where they are.
pub fn stop(world: &mut World) {
    world.command = Some(ControlCommand::Hold);
    world.command_status = CommandStatus::None;
}

pub fn motion_done(world: &World) -> bool {
    world.command_status().is_terminal()
}

/// Step until the current motion is terminal or `timeout` simulated seconds pass.
pub fn wait_motion_done(world: &mut World, timeout: f64) -> Result<MotionStatus> {
    let t0 = world.sim_time();
    while !world.command_status().is_terminal() {
        if world.sim_time() - t0 >= timeout {
            return Err(Error::Timeout(timeout));
        }
        world.step();
    }
    Ok(MotionStatus::from_world(world))
}

fn finish(world: &mut World, options: MotionOptions) -> Result<MotionStatus> {
    if options.wait {
        wait_motion_done(world, options.timeout)
    } else {
        Ok(MotionStatus::from_world(world))
    }
}

/// Joint integration for one step; called by the world before kinematics.
pub(crate) fn integrate_joints(world: &mut World) {
    let h = world.step_size;
    let model = std::sync::Arc::clone(&world.model);
    match &world.command {
        Some(ControlCommand::Velocity(v)) => {
            for d in 0..world.q.len() {
                let q_new = model.actuated_joint(d).clamp(world.q[d] + v[d] * h);
                world.q_dot[d] = (q_new - world.q[d]) / h;
                world.q[d] = q_new;
            }
        }
        Some(cmd @ (ControlCommand::Position { .. } | ControlCommand::Waypoints { .. })) => {
            let targets = cmd.targets().unwrap();
            for d in 0..world.q.len() {
                let vmax = model.actuated_joint(d).max_velocity;
                let step = (targets[d] - world.q[d]).clamp(-vmax * h, vmax * h);
                world.q[d] += step;
                world.q_dot[d] = step / h;
            }
        }
        Some(ControlCommand::Hold) | None => world.q_dot.iter_mut().for_each(|v| *v = 0.0),
    }
}

fn advance_waypoints(world: &mut World) {
    let poses = world.link_poses.clone();
    if let Some(ControlCommand::Waypoints {
        link,
        positions,
        index,
        switch_radius,
        ..
    }) = &mut world.command
    {
        while *index + 1 < positions.len() && (poses[*link].position - positions[*index]).norm() < *switch_radius {
            *index += 1;
        }
    }
}

/// Post-step bookkeeping: waypoint switching, completion and collision stops.
pub(crate) fn update_command_status(world: &mut World, contacts: &[Contact]) {
    if world.command_status != CommandStatus::Running {
        return;
    }
    let Some(options) = world.command.as_ref().and_then(|c| c.options()).copied() else {
        return;
    };
    if options.stop_on_collision
        && contacts
            .iter()
            .any(|c| (c.is_robot_contact() && !c.is_self_contact()) || (options.check_self_collision && c.is_self_contact()))
    {
        world.command = Some(ControlCommand::Hold);
        world.command_status = CommandStatus::StoppedOnCollision;
        return;
    }
    advance_waypoints(world);
    let last = match &world.command {
        Some(ControlCommand::Waypoints { index, targets, .. }) => *index + 1 == targets.len(),
        _ => true,
    };
    let targets = world.command.as_ref().and_then(|c| c.targets()).unwrap();
    let reached = world
        .q
        .iter()
        .zip(targets)
        .all(|(q, t)| (q - t).abs() < POSITION_TOLERANCE);
    if last && reached {
        world.command_status = CommandStatus::Done;
    }
}

#[cfg(test)]
mod tests;
