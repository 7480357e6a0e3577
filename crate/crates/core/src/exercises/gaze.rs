//! Keep the head pointed at a ball moving in a horizontal plane.

use std::fmt::Write as _;

use nalgebra::Vector3;

use super::{logs::NumericTable, Budget, Exercise, GradeReport, RunFiles, Unit};
use crate::control::{gaze_angle, gaze_plane_decomposition, move_velocity};
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::world::World;

pub const GAZE_GAIN: f64 = 10.0;
pub const GAZE_MEAN_THRESHOLD: f64 = 0.05;
pub const GAZE_MAX_THRESHOLD: f64 = 0.2;

const HEAD_LINK: &str = "head";
const NECK_JOINTS: [&str; 2] = ["neck_pitch", "neck_yaw"];
const DURATION: f64 = 10.0;

/// The head's look direction (its x axis) and the vector from the head to `target`.
fn gaze_vectors(world: &World, target: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let head = world.link_pose(world.model().link_id(HEAD_LINK)?);
    Ok((head.axis(0), target - head.position))
}

/// Angle between where the head looks and where `target` is.
pub fn gaze_error(world: &World, target: &Vector3<f64>) -> Result<f64> {
    let (look, to) = gaze_vectors(world, target)?;
    gaze_angle(&look, &to)
}

/// Proportional neck velocities (pitch, yaw) turning the head towards
/// `target`, clamped to the joint limits' velocities.
pub fn reference_gaze_command(world: &World, target: &Vector3<f64>) -> Result<Vec<f64>> {
    let (look, to) = gaze_vectors(world, target)?;
    let model = world.model();
    let mut axes = Vec::with_capacity(NECK_JOINTS.len());
    let mut limits = Vec::with_capacity(NECK_JOINTS.len());
    for name in NECK_JOINTS {
        let joint = model.actuated_joint(model.dof_index(name)?);
        let ji = model
            .joints
            .iter()
            .position(|j| j.name == name)
            .ok_or_else(|| Error::UnknownJoint(name.into()))?;
        let frame = world.link_pose(model.joint_child_link(ji));
        axes.push(frame.transform_vector(&joint.axis).normalize());
        limits.push(joint.max_velocity);
    }
    let corrections = gaze_plane_decomposition(&look, &to, &axes)?;
    Ok(corrections
        .iter()
        .zip(&limits)
        .map(|(c, m)| (GAZE_GAIN * c).clamp(-m, *m))
        .collect())
}

/// Mean and max of an angle-error series; passes below both thresholds.
pub fn grade_gaze(series: &[(f64, f64)]) -> Result<GradeReport> {
    if series.is_empty() {
        return Err(Error::InvalidParams("empty gaze error series".into()));
    }
    let mean = series.iter().map(|s| s.1).sum::<f64>() / series.len() as f64;
    let max = series.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let pass = mean < GAZE_MEAN_THRESHOLD && max < GAZE_MAX_THRESHOLD;
    let mut r = GradeReport::new(Exercise::Gaze, mean, Unit::Radians, pass);
    r.metrics = vec![("mean".into(), mean), ("max".into(), max)];
    r.series = series.to_vec();
    Ok(r)
}

/// Ball path: a Lissajous curve in front of the head, 0.1 m below it.
fn ball_position(t: f64, head_z: f64) -> Vector3<f64> {
    Vector3::new(0.8 + 0.1 * (0.5 * t).sin(), 0.3 * (0.6 * t).sin(), head_z - 0.1)
}

pub(super) fn run(world: &mut World, budget: &Budget, files: &mut RunFiles) -> Result<()> {
    let ball = world.object_id("ball")?;
    let head_z = world.link_pose(world.model().link_id(HEAD_LINK)?).position.z;
    world.set_object_pose(ball, Pose::from_translation(ball_position(world.sim_time(), head_z)));
    let mut csv = String::from("sim_time,theta\n");
    let n = (DURATION / world.step_size()).round() as u64;
    for _ in 0..n {
        let target = world.object(ball).pose.position;
        let v = reference_gaze_command(world, &target)?;
        let status = move_velocity(world, &NECK_JOINTS, &v)?;
        if status.is_rejected() {
            return Err(Error::Scenario(status.detail));
        }
        let next = world.sim_time() + world.step_size();
        world.set_object_pose(ball, Pose::from_translation(ball_position(next, head_z)));
        budget.step(world)?;
        let theta = gaze_error(world, &world.object(ball).pose.position)?;
        writeln!(csv, "{},{theta}", world.sim_time()).unwrap();
    }
    files.run.set("duration", DURATION);
    files.extra.push(("gaze.csv".into(), csv));
    Ok(())
}

pub(super) fn grade_files(files: &RunFiles) -> Result<GradeReport> {
    let csv = files
        .extra("gaze.csv")
        .ok_or_else(|| Error::SchemaMismatch("missing gaze.csv".into()))?;
    let table = NumericTable::parse(csv)?;
    let t = table.values("sim_time")?;
    let theta = table.values("theta")?;
    grade_gaze(&t.into_iter().zip(theta).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_an_error() {
        assert!(grade_gaze(&[]).is_err());
    }

    #[test]
    fn all_zero_passes() {
        let r = grade_gaze(&[(0.1, 0.0), (0.2, 0.0)]).unwrap();
        assert_eq!((r.metric("mean"), r.metric("max"), r.pass), (Some(0.0), Some(0.0), true));
    }

    #[test]
    fn constant_error() {
        let r = grade_gaze(&[(0.1, 0.1), (0.2, 0.1), (0.3, 0.1)]).unwrap();
        assert!((r.metric("mean").unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(r.metric("max"), Some(0.1));
        assert!(!r.pass);
    }

    #[test]
    fn mean_and_max() {
        let r = grade_gaze(&[(0.0, 0.0), (1.0, 0.1), (2.0, 0.2)]).unwrap();
        assert!((r.score - 0.1).abs() < 1e-15);
        assert_eq!(r.metric("max"), Some(0.2));
    }
}
