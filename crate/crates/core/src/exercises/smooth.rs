//! Draw a line and a circle with the hand; graded against the reference
//! shapes.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DVector, Vector3};

use super::{fmt_vec, parse_vec, Budget, Exercise, GradeReport, RunFiles, Unit};
use crate::control::{rrmc, set_velocity, stop, RrmcMethod};
use crate::error::{Error, Result};
use crate::geometry::closest_point_on_segment;
use crate::kinematics::point_jacobian;
use crate::world::World;

/// Pass threshold on the worse of the line and circle metrics (m).
pub const SMOOTH_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Line {
        p0: Vector3<f64>,
        p1: Vector3<f64>,
    },
    Circle {
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
    },
}

impl Reference {
    /// Geometric error of one sample: distance to the segment, or radial
    /// plus out-of-plane distance for the circle.
    pub fn deviation(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Reference::Line { p0, p1 } => (p - closest_point_on_segment(p, &p0, &p1)).norm(),
            Reference::Circle { center, normal, radius } => {
                let (radial, out) = circle_parts(&center, &normal.normalize(), radius, p);
                radial + out
            }
        }
    }
}

fn circle_parts(center: &Vector3<f64>, n: &Vector3<f64>, radius: f64, p: &Vector3<f64>) -> (f64, f64) {
    let d = p - center;
    let out = d.dot(n);
    (((d - n * out).norm() - radius).abs(), out.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryGrade {
    /// Line: max distance to the segment plus both endpoint errors.
    /// Circle: RMS radial error plus max out-of-plane distance.
    pub metric: f64,
    /// Max norm of the third difference of position over dt³ (m/s³).
    pub jerk: f64,
}

/// Score time-stamped positions against a reference shape.
pub fn grade_trajectory(samples: &[(f64, Vector3<f64>)], reference: &Reference) -> Result<TrajectoryGrade> {
    if samples.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "trajectory grading needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let metric = match *reference {
        Reference::Line { p0, p1 } => {
            let max_perp = samples
                .iter()
                .map(|(_, p)| (p - closest_point_on_segment(p, &p0, &p1)).norm())
                .fold(0.0, f64::max);
            let first = samples[0].1;
            let last = samples[samples.len() - 1].1;
            max_perp + (first - p0).norm() + (last - p1).norm()
        }
        Reference::Circle { center, normal, radius } => {
            let n = normal
                .try_normalize(1e-12)
                .ok_or(Error::ZeroVector)?;
            let mut sq = 0.0;
            let mut max_out: f64 = 0.0;
            for (_, p) in samples {
                let (radial, out) = circle_parts(&center, &n, radius, p);
                sq += radial * radial;
                max_out = max_out.max(out);
            }
            (sq / samples.len() as f64).sqrt() + max_out
        }
    };
    let mut jerk: f64 = 0.0;
    for w in samples.windows(4) {
        let dt = (w[3].0 - w[0].0) / 3.0;
        let d3 = w[3].1 - w[2].1 * 3.0 + w[1].1 * 3.0 - w[0].1;
        jerk = jerk.max(d3.norm() / (dt * dt * dt));
    }
    Ok(TrajectoryGrade { metric, jerk })
}

const GAIN: f64 = 10.0;
const APPROACH_SPEED: f64 = 0.15;
const APPROACH_TIME: f64 = 2.0;
const LINE_TIME: f64 = 2.0;
const CIRCLE_TIME: f64 = 4.0;
const HOLD_TIME: f64 = 0.25;

const LINE_P0: [f64; 3] = [0.25, -0.1, 0.1];
const LINE_P1: [f64; 3] = [0.25, -0.3, 0.1];
const CIRCLE_CENTER: [f64; 3] = [0.25, -0.2, 0.1];
const CIRCLE_RADIUS: f64 = 0.05;

/// Minimum-jerk time scaling: position and rate for `tau` in [0, 1].
fn min_jerk(tau: f64) -> (f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    (s, ds)
}

/// One resolved-rate step of the end effector towards `p_ref` with
/// feed-forward velocity `v_ref`.
fn track(world: &mut World, p_ref: &Vector3<f64>, v_ref: &Vector3<f64>, max_speed: f64) -> Result<()> {
    let link = world.end_effector();
    let p = world.link_pose(link).position;
    let mut xdot = v_ref + (p_ref - p) * GAIN;
    if xdot.norm() > max_speed {
        xdot *= max_speed / xdot.norm();
    }
    let jac = point_jacobian(world.model(), world.link_poses(), link, &p);
    let lin = jac.matrix.rows(0, 3).into_owned();
    let dq = rrmc(&lin, &DVector::from_column_slice(xdot.as_slice()), RrmcMethod::PseudoInverse)?;
    let mut v = jac.scatter(dq.as_slice(), world.model().dof());
    let scale = world
        .model()
        .actuated_joints()
        .zip(&v)
        .map(|(j, x)| x.abs() / j.max_velocity)
        .fold(1.0, f64::max);
    v.iter_mut().for_each(|x| *x /= scale);
    let status = set_velocity(world, v)?;
    if status.is_rejected() {
        return Err(Error::Scenario(status.detail));
    }
    Ok(())
}

fn approach(world: &mut World, budget: &Budget, target: &Vector3<f64>) -> Result<()> {
    let n = (APPROACH_TIME / world.step_size()).round() as u64;
    for _ in 0..n {
        track(world, target, &Vector3::zeros(), APPROACH_SPEED)?;
        budget.step(world)?;
    }
    Ok(())
}

/// Follow a time-parametrised path `path(s) -> (position, d position / ds)`
/// over `duration`; returns the time window and per-step deviations.
fn trace(
    world: &mut World,
    budget: &Budget,
    duration: f64,
    reference: &Reference,
    path: impl Fn(f64) -> (Vector3<f64>, Vector3<f64>),
    series: &mut String,
) -> Result<(f64, f64)> {
    let start = world.sim_time();
    let n = (duration / world.step_size()).round() as u64;
    for k in 0..n {
        let tau = (k + 1) as f64 / n as f64;
        let (s, ds) = min_jerk(tau);
        let (p, dp) = path(s);
        track(world, &p, &(dp * ds / duration), f64::INFINITY)?;
        budget.step(world)?;
        let ee = world.link_pose(world.end_effector()).position;
        writeln!(series, "{},{}", world.sim_time(), reference.deviation(&ee)).unwrap();
    }
    let end = world.sim_time();
    stop(world);
    budget.run_for(world, HOLD_TIME)?;
    Ok((start, end))
}

/// Reference controller: resolved-rate tracking of a minimum-jerk line and
/// circle with the pseudoinverse of the end-effector position Jacobian.
pub(super) fn run(world: &mut World, budget: &Budget, files: &mut RunFiles) -> Result<()> {
    let (p0, p1) = (Vector3::from(LINE_P0), Vector3::from(LINE_P1));
    let center = Vector3::from(CIRCLE_CENTER);
    let normal = Vector3::x();
    let (u, w) = (Vector3::y(), Vector3::z());
    let line = Reference::Line { p0, p1 };
    let circle = Reference::Circle {
        center,
        normal,
        radius: CIRCLE_RADIUS,
    };
    let mut series = String::from("sim_time,error\n");

    approach(world, budget, &p0)?;
    let (ls, le) = trace(world, budget, LINE_TIME, &line, |s| (p0 + (p1 - p0) * s, p1 - p0), &mut series)?;

    let c0 = center + u * CIRCLE_RADIUS;
    approach(world, budget, &c0)?;
    let (cs, ce) = trace(
        world,
        budget,
        CIRCLE_TIME,
        &circle,
        |s| {
            let phi = TAU * s;
            let p = center + (u * phi.cos() + w * phi.sin()) * CIRCLE_RADIUS;
            let dp = (w * phi.cos() - u * phi.sin()) * (CIRCLE_RADIUS * TAU);
            (p, dp)
        },
        &mut series,
    )?;

    let kv = &mut files.run;
    kv.set("line_p0", fmt_vec(&p0));
    kv.set("line_p1", fmt_vec(&p1));
    kv.set("line_start", ls);
    kv.set("line_end", le);
    kv.set("circle_center", fmt_vec(&center));
    kv.set("circle_normal", fmt_vec(&normal));
    kv.set("circle_radius", CIRCLE_RADIUS);
    kv.set("circle_start", cs);
    kv.set("circle_end", ce);
    files.extra.push(("smooth.csv".into(), series));
    Ok(())
}

fn window(files: &RunFiles, start_key: &str, end_key: &str) -> Result<Vec<(f64, Vector3<f64>)>> {
    let (start, end) = (files.run.require_f64(start_key)?, files.run.require_f64(end_key)?);
    let traj = files.trajectory_table()?;
    let t = traj.column("sim_time")?;
    let (x, y, z) = (traj.column("ee_x")?, traj.column("ee_y")?, traj.column("ee_z")?);
    Ok(traj
        .rows
        .iter()
        .filter(|r| r[t] >= start && r[t] <= end)
        .map(|r| (r[t], Vector3::new(r[x], r[y], r[z])))
        .collect())
}

/// Offline grade from the end-effector columns inside the recorded windows.
pub(super) fn grade_files(files: &RunFiles) -> Result<GradeReport> {
    let kv = &files.run;
    let line = Reference::Line {
        p0: parse_vec(kv, "line_p0")?,
        p1: parse_vec(kv, "line_p1")?,
    };
    let circle = Reference::Circle {
        center: parse_vec(kv, "circle_center")?,
        normal: parse_vec(kv, "circle_normal")?,
        radius: kv.require_f64("circle_radius")?,
    };
    let line_samples = window(files, "line_start", "line_end")?;
    let circle_samples = window(files, "circle_start", "circle_end")?;
    let lg = grade_trajectory(&line_samples, &line)?;
    let cg = grade_trajectory(&circle_samples, &circle)?;
    let score = lg.metric.max(cg.metric);
    let mut rep = GradeReport::new(Exercise::Smooth, score, Unit::Meters, score < SMOOTH_THRESHOLD);
    rep.metrics = vec![
        ("line_metric".into(), lg.metric),
        ("circle_metric".into(), cg.metric),
        ("line_jerk".into(), lg.jerk),
        ("circle_jerk".into(), cg.jerk),
    ];
    rep.series = line_samples
        .iter()
        .map(|(t, p)| (*t, line.deviation(p)))
        .chain(circle_samples.iter().map(|(t, p)| (*t, circle.deviation(p))))
        .collect();
    Ok(rep)
}
