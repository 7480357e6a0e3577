//! Find a green ball with the eye camera, grasp it and lift it.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ball_radius, fmt_vec, run_motion, settled_from, table_and_ball, tilted_hand};
use super::{Budget, Exercise, GradeReport, RunFiles, Unit};
use crate::control::{follow_waypoints, move_cartesian, move_position, move_velocity, stop, MotionOptions, MotionStatus};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::pose::Pose;
use crate::vision::{camera_pose, deproject_pixel, detect_color_blob, render_camera};
use crate::world::{BodyId, World};

/// Pass threshold on the lift height (m).
pub const GRASP_THRESHOLD: f64 = 0.25;

const CAMERA: &str = "right_eye";
const BALL_COLOR: [u8; 3] = [0, 200, 0];
const COLOR_TOLERANCE: [u8; 3] = [40, 40, 40];
const GRIPPER: &str = "r_gripper";
const HAND_LINKS: [&str; 3] = ["r_hand", "r_finger", "r_thumb"];
const HAND_TILT: f64 = 1.2;
/// Pre-grasp offset back along the finger direction (m).
const RETREAT: f64 = 0.08;
const DESCENT_POINTS: usize = 4;
const GRIPPER_OPEN: f64 = -0.4;
const CLOSE_SPEED: f64 = 1.0;
const CLOSE_TIMEOUT: f64 = 3.0;
/// The ball is lifted by swinging the arm up at the shoulder (rad).
const LIFT_JOINT: &str = "r_shoulder_pitch";
const LIFT: f64 = 0.9;
const STOPPED_SPEED: f64 = 1e-3;
const SETTLE_TIME: f64 = 1.0;
const TOUCH_TOLERANCE: f64 = 1e-4;

/// Seeded ball positions are drawn from this table-top rectangle.
const BALL_X: (f64, f64) = (0.38, 0.46);
const BALL_Y: (f64, f64) = (-0.24, -0.16);

/// World position of a ball of `radius` seen by `camera`: the blob
/// centroid is deprojected at its depth, then pushed back by one radius
/// along the viewing ray (the depth sees the near surface).
pub fn locate_ball(world: &World, camera: &str, color: [u8; 3], radius: f64) -> Result<Vector3<f64>> {
    let img = render_camera(world, camera)?;
    let blob = detect_color_blob(&img.rgb, color, COLOR_TOLERANCE).ok_or(Error::BallNotFound)?;
    let depth = img.depth.get(blob.u.round() as u32, blob.v.round() as u32);
    if !depth.is_finite() {
        return Err(Error::BallNotFound);
    }
    let cam = world.model().camera(camera)?;
    let pose = camera_pose(world, cam)?;
    let surface = pose.transform_point(&deproject_pixel(cam, blob.u, blob.v, depth)?);
    let ray = (surface - pose.position).normalize();
    Ok(surface + ray * radius)
}

fn table_top(shape: &Shape, pose: &Pose) -> f64 {
    shape.aabb(pose).max.z
}

fn lift_score(ball_z: f64, radius: f64, top: f64) -> f64 {
    let gap = ball_z - radius - top;
    if gap <= TOUCH_TOLERANCE {
        0.0
    } else {
        gap
    }
}

fn report(score: f64) -> GradeReport {
    GradeReport::new(Exercise::Grasp, score, Unit::Meters, score >= GRASP_THRESHOLD)
}

/// Wait one second after the robot stops, then score the height of the
/// ball's lowest point above the table top.
pub fn grade_grasp(world: &mut World) -> Result<GradeReport> {
    while world.q_dot().iter().any(|v| v.abs() >= STOPPED_SPEED) {
        world.step();
    }
    for _ in 0..(SETTLE_TIME / world.step_size()).round() as u64 {
        world.step();
    }
    let table = world.object(world.object_id("table")?);
    let ball = world.object(world.object_id("ball")?);
    let r = match ball.shape {
        Shape::Sphere { radius } => radius,
        _ => return Err(Error::Scenario("`ball` must be a sphere".into())),
    };
    let top = table_top(&table.shape, &table.collider_pose());
    Ok(report(lift_score(ball.pose.position.z, r, top)))
}

/// Step until the motion ends, failing if a hand link touches the table.
fn descend_watch(world: &mut World, budget: &Budget, table: usize, timeout: f64) -> Result<MotionStatus> {
    let hand: Vec<BodyId> = HAND_LINKS
        .iter()
        .map(|n| world.model().link_id(n).map(BodyId::Link))
        .collect::<Result<_>>()?;
    let t0 = world.sim_time();
    while !world.command_status().is_terminal() {
        if world.sim_time() - t0 >= timeout {
            return Err(Error::Timeout(timeout));
        }
        budget.step(world)?;
        let hit = world
            .contacts()
            .iter()
            .any(|c| c.involves(BodyId::Object(table)) && hand.iter().any(|&h| c.involves(h)));
        if hit {
            return Err(Error::DescentCollision);
        }
    }
    Ok(super::MotionStatus {
        state: crate::control::MotionState::Done,
        detail: String::new(),
    })
}

/// Look, reach above the ball, open, descend, close until the ball is held,
/// then swing the arm up at the shoulder.
pub fn reference_grasp_pipeline(world: &mut World, budget: &Budget) -> Result<MotionStatus> {
    let ball = world.object_id("ball")?;
    let table = world.object_id("table")?;
    let r = match world.object(ball).shape {
        Shape::Sphere { radius } => radius,
        _ => return Err(Error::Scenario("`ball` must be a sphere".into())),
    };
    let center = locate_ball(world, CAMERA, BALL_COLOR, r)?;

    let rot = tilted_hand(HAND_TILT);
    let fingers = rot * Vector3::new(0.0, 0.0, -1.0);
    let above = center - fingers * RETREAT;
    let status = move_cartesian(world, &Pose::new(above, rot), MotionOptions::default())?;
    run_motion(world, budget, "reach above the ball", status, 10.0)?;

    let status = move_position(world, &[GRIPPER], &[GRIPPER_OPEN], MotionOptions::default())?;
    run_motion(world, budget, "open gripper", status, 5.0)?;

    let waypoints: Vec<Pose> = (1..=DESCENT_POINTS)
        .map(|k| Pose::new(above + (center - above) * (k as f64 / DESCENT_POINTS as f64), rot))
        .collect();
    let status = follow_waypoints(world, &waypoints, 0.005, MotionOptions::default())?;
    if status.is_rejected() {
        return Err(Error::Scenario(format!("descent: {}", status.detail)));
    }
    descend_watch(world, budget, table, 10.0)?;

    let status = move_velocity(world, &[GRIPPER], &[CLOSE_SPEED])?;
    if status.is_rejected() {
        return Err(Error::Scenario(status.detail));
    }
    let t0 = world.sim_time();
    while world.object(ball).attachment.is_none() {
        if world.sim_time() - t0 >= CLOSE_TIMEOUT {
            return Err(Error::Scenario("gripper closed without holding the ball".into()));
        }
        budget.step(world)?;
    }
    stop(world);

    let sp = world.model().dof_index(LIFT_JOINT)?;
    let target = world.q()[sp] - LIFT;
    let status = move_position(world, &[LIFT_JOINT], &[target], MotionOptions::default())?;
    run_motion(world, budget, "lift", status, 10.0)
}

pub(super) fn run(world: &mut World, seed: u64, budget: &Budget, files: &mut RunFiles) -> Result<()> {
    let ball = world.object_id("ball")?;
    if seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = world.object(ball).pose.position;
        p.x = rng.gen_range(BALL_X.0..=BALL_X.1);
        p.y = rng.gen_range(BALL_Y.0..=BALL_Y.1);
        world.set_object_pose(ball, Pose::from_translation(p));
    }
    files.run.set("ball_start", fmt_vec(&world.object(ball).pose.position));
    reference_grasp_pipeline(world, budget)?;
    while world.q_dot().iter().any(|v| v.abs() >= STOPPED_SPEED) {
        budget.step(world)?;
    }
    budget.run_for(world, SETTLE_TIME)?;
    Ok(())
}

/// Offline grade: ball height one second after the robot's last motion.
pub(super) fn grade_files(files: &RunFiles) -> Result<GradeReport> {
    let cfg = files.scene()?;
    let (table, ball) = table_and_ball(&cfg)?;
    let top = table_top(&super::collision_shape(table)?, &table.pose);
    let r = ball_radius(ball)?;
    let traj = files.trajectory_table()?;
    if traj.rows.is_empty() {
        return Err(Error::SchemaMismatch("empty trajectory".into()));
    }
    let stop = settled_from(&traj, STOPPED_SPEED).min(traj.rows.len() - 1);
    let t = traj.values("sim_time")?;
    let h = files.run.require_f64("step_size")?;
    let eval = t
        .iter()
        .position(|&ti| ti >= t[stop] + SETTLE_TIME - 0.5 * h)
        .unwrap_or(t.len() - 1);
    let balls = super::object_positions(&traj, &ball.name)?;
    let mut rep = report(lift_score(balls[eval].z, r, top));
    rep.metrics.push(("graded_at".into(), t[eval]));
    Ok(rep)
}
