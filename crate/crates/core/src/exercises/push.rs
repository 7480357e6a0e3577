//! Push a ball off the table with one swing of the arm.

use nalgebra::Vector3;

use super::{collision_shape, run_motion, settled_from, table_and_ball, ball_radius, tilted_hand};
use super::{Budget, Exercise, GradeReport, RunFiles, Unit};
use crate::control::{follow_waypoints, move_cartesian, MotionOptions};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::pose::Pose;
use crate::world::World;

/// Simulated seconds `grade_push` waits for the robot to stop.
pub const PUSH_BUDGET: f64 = 60.0;
const STOPPED_SPEED: f64 = 1e-3;
const SETTLE_TIME: f64 = 2.0;
/// Gaps below this count as touching.
const TOUCH_TOLERANCE: f64 = 1e-4;

const HAND_TILT: f64 = 1.2;
const APPROACH: [f64; 3] = [0.42, -0.18, 0.15];
const SWEEP_START: [f64; 3] = [0.42, -0.18, 0.035];
const SWEEP_END_Y: f64 = -0.45;
const SWEEP_POINTS: usize = 6;

/// Distance from the ball's surface to the table geometry, 0 when touching.
pub fn push_score(table: &Shape, table_pose: &Pose, ball_center: &Vector3<f64>, ball_radius: f64) -> f64 {
    let gap = table.signed_distance(table_pose, ball_center).0 - ball_radius;
    if gap <= TOUCH_TOLERANCE {
        0.0
    } else {
        gap
    }
}

fn report(score: f64) -> GradeReport {
    GradeReport::new(Exercise::Push, score, Unit::Meters, score > 0.0)
}

/// Wait for the robot to stop, simulate two more seconds, then score the
/// ball's distance from the table.
pub fn grade_push(world: &mut World, budget: f64) -> Result<GradeReport> {
    let t0 = world.sim_time();
    while world.q_dot().iter().any(|v| v.abs() >= STOPPED_SPEED) {
        if world.sim_time() - t0 >= budget {
            return Err(Error::Timeout(budget));
        }
        world.step();
    }
    let steps = (SETTLE_TIME / world.step_size()).round() as u64;
    for _ in 0..steps {
        world.step();
    }
    let table = world.object(world.object_id("table")?);
    let ball = world.object(world.object_id("ball")?);
    let r = match ball.shape {
        Shape::Sphere { radius } => radius,
        _ => return Err(Error::Scenario("`ball` must be a sphere".into())),
    };
    Ok(report(push_score(&table.shape, &table.collider_pose(), &ball.pose.position, r)))
}

/// Reference swing: approach beside the ball, lower the hand, then sweep
/// towards the table edge so the finger carries the ball off.
pub(super) fn run(world: &mut World, budget: &Budget, files: &mut RunFiles) -> Result<()> {
    let rot = tilted_hand(HAND_TILT);
    let approach = Pose::new(Vector3::from(APPROACH), rot);
    let status = move_cartesian(world, &approach, MotionOptions::default())?;
    run_motion(world, budget, "approach", status, 10.0)?;

    let start = Vector3::from(SWEEP_START);
    let waypoints: Vec<Pose> = (0..=SWEEP_POINTS)
        .map(|k| {
            let s = k as f64 / SWEEP_POINTS as f64;
            let mut p = start;
            p.y += s * (SWEEP_END_Y - start.y);
            Pose::new(p, rot)
        })
        .collect();
    let status = follow_waypoints(world, &waypoints, 0.01, MotionOptions::default())?;
    run_motion(world, budget, "sweep", status, 10.0)?;

    let t0 = world.sim_time();
    while world.q_dot().iter().any(|v| v.abs() >= STOPPED_SPEED) {
        if world.sim_time() - t0 >= PUSH_BUDGET {
            return Err(Error::Timeout(PUSH_BUDGET));
        }
        budget.step(world)?;
    }
    budget.run_for(world, SETTLE_TIME)?;
    files.run.set("settle_time", SETTLE_TIME);
    Ok(())
}

/// Offline grade: the ball at `SETTLE_TIME` after the robot's last motion.
pub(super) fn grade_files(files: &RunFiles) -> Result<GradeReport> {
    let cfg = files.scene()?;
    let (table, ball) = table_and_ball(&cfg)?;
    let shape = collision_shape(table)?;
    let r = ball_radius(ball)?;
    let traj = files.trajectory_table()?;
    if traj.rows.is_empty() {
        return Err(Error::SchemaMismatch("empty trajectory".into()));
    }
    let stop = settled_from(&traj, STOPPED_SPEED);
    if stop == traj.rows.len() {
        return Err(Error::Timeout(PUSH_BUDGET));
    }
    let t = traj.values("sim_time")?;
    let h = files.run.require_f64("step_size")?;
    let eval = t
        .iter()
        .position(|&ti| ti >= t[stop] + SETTLE_TIME - 0.5 * h)
        .unwrap_or(t.len() - 1);
    let balls = super::object_positions(&traj, &ball.name)?;
    let mut rep = report(push_score(&shape, &table.pose, &balls[eval], r));
    rep.metrics.push(("robot_stopped_at".into(), t[stop]));
    rep.metrics.push(("graded_at".into(), t[eval]));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> (Shape, Pose) {
        (
            Shape::Box {
                half_extents: Vector3::new(0.25, 0.4, 0.03),
            },
            Pose::from_translation(Vector3::new(0.45, 0.0, -0.03)),
        )
    }

    #[test]
    fn resting_ball_scores_zero() {
        let (s, p) = table();
        assert_eq!(push_score(&s, &p, &Vector3::new(0.3, 0.1, 0.03), 0.03), 0.0);
        assert_eq!(push_score(&s, &p, &Vector3::new(0.3, 0.1, 0.03005), 0.03), 0.0);
    }

    #[test]
    fn ball_beyond_edge_scores_horizontal_gap() {
        let (s, p) = table();
        // Table-height ball 1 m past the +x edge at x = 0.7.
        let c = Vector3::new(1.7, 0.0, -0.03);
        assert!((push_score(&s, &p, &c, 0.03) - 0.97).abs() < 1e-12);
    }

    #[test]
    fn ball_off_a_corner() {
        let (s, p) = table();
        let c = Vector3::new(0.7 + 0.3, 0.4 + 0.4, 0.0);
        assert!((push_score(&s, &p, &c, 0.03) - (0.5 - 0.03)).abs() < 1e-12);
    }
}
