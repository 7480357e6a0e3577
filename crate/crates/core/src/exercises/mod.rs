//! The five graded exercises: reference controllers, scenario drivers and
//! graders that work both on a live world and offline on a run directory.
//!
//! A run directory holds `run.txt` (key=value metadata), `scene.yaml` (the
//! config text), `trajectory.csv`, `skin.csv`, `report.txt` and, for some
//! exercises, a CSV error series.

mod avoidance;
mod gaze;
mod grasp;
mod logs;
mod push;
mod smooth;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::control::{wait_motion_done, MotionStatus};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::model::{ObjectShape, ObjectSpec, SceneConfig};
use crate::scene;
use crate::world::{World, SKIN_FILE, TRAJECTORY_FILE};

pub use avoidance::{
    reference_avoidance_command, run_avoidance_scenario, AvoidanceController, Difficulty, AVOIDANCE_CLEAR_TIME,
    AVOIDANCE_SPEED, CLUSTER_THRESHOLD, SATURATION_ACTIVATION, SATURATION_TIME,
};
pub use gaze::{gaze_error, grade_gaze, reference_gaze_command, GAZE_GAIN, GAZE_MAX_THRESHOLD, GAZE_MEAN_THRESHOLD};
pub use grasp::{grade_grasp, locate_ball, reference_grasp_pipeline, GRASP_THRESHOLD};
pub use logs::{KeyValues, NumericTable, SkinTimeline, RUN_FILE, SCENE_FILE};
pub use push::{grade_push, push_score, PUSH_BUDGET};
pub use smooth::{grade_trajectory, Reference, TrajectoryGrade, SMOOTH_THRESHOLD};

pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exercise {
    Push,
    Smooth,
    Gaze,
    Avoidance,
    Grasp,
}

impl Exercise {
    pub const ALL: [Exercise; 5] = [
        Exercise::Push,
        Exercise::Smooth,
        Exercise::Gaze,
        Exercise::Avoidance,
        Exercise::Grasp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Exercise::Push => "push",
            Exercise::Smooth => "smooth",
            Exercise::Gaze => "gaze",
            Exercise::Avoidance => "avoidance",
            Exercise::Grasp => "grasp",
        }
    }

    /// Shipped scene config for this exercise.
    pub fn scene_path(self) -> PathBuf {
        scene::scene_path(self.name())
    }

    /// Seeds of the shipped scenarios.
    pub fn seeds(self) -> &'static [u64] {
        match self {
            Exercise::Avoidance => &[0, 1],
            Exercise::Grasp => &[1, 2, 3],
            _ => &[0],
        }
    }

    /// Step budget used when none is given.
    pub fn default_steps(self) -> u64 {
        match self {
            Exercise::Push => 30 * 240,
            Exercise::Smooth => 20 * 240,
            Exercise::Gaze => 12 * 240,
            Exercise::Avoidance => 12 * 240,
            Exercise::Grasp => 40 * 240,
        }
    }

    /// Name of the CSV error series written next to the logs, if any.
    pub fn series_file(self) -> Option<&'static str> {
        match self {
            Exercise::Gaze => Some("gaze.csv"),
            Exercise::Smooth => Some("smooth.csv"),
            _ => None,
        }
    }
}

impl std::fmt::Display for Exercise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Exercise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Exercise::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown exercise `{s}` (push, smooth, gaze, avoidance, grasp)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Meters,
    Radians,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Meters => "m",
            Unit::Radians => "rad",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradeReport {
    pub exercise: Exercise,
    pub score: f64,
    pub unit: Unit,
    pub pass: bool,
    /// Extra named diagnostics, printed after the score.
    pub metrics: Vec<(String, f64)>,
    /// Time-indexed error values.
    pub series: Vec<(f64, f64)>,
}

impl GradeReport {
    pub fn new(exercise: Exercise, score: f64, unit: Unit, pass: bool) -> Self {
        Self {
            exercise,
            score,
            unit,
            pass,
            metrics: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.set("exercise", self.exercise);
        kv.set("score", self.score);
        kv.set("unit", self.unit.as_str());
        kv.set("pass", self.pass);
        for (k, v) in &self.metrics {
            kv.set(k, v);
        }
        kv.to_text()
    }

    pub fn series_csv(&self) -> String {
        let mut s = String::from("sim_time,error\n");
        for (t, e) in &self.series {
            writeln!(s, "{t},{e}").unwrap();
        }
        s
    }
}

/// Everything `simulate` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: PathBuf,
    /// `None` runs an idle loop.
    pub exercise: Option<Exercise>,
    pub seed: u64,
    /// Step budget; defaults to 240 for idle runs and to
    /// [`Exercise::default_steps`] otherwise.
    pub steps: Option<u64>,
    /// 0 runs as fast as possible.
    pub realtime_factor: f64,
    pub log_dir: PathBuf,
}

impl RunManifest {
    pub fn budget(&self) -> u64 {
        self.steps
            .unwrap_or_else(|| self.exercise.map_or(240, Exercise::default_steps))
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget() == 0 {
            return Err(Error::InvalidParams("step budget must be positive".into()));
        }
        if !(self.realtime_factor >= 0.0 && self.realtime_factor.is_finite()) {
            return Err(Error::InvalidParams("realtime factor must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Steps a world while enforcing a total step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
}

impl Budget {
    pub fn new(max_steps: u64) -> Self {
        Self { max_steps }
    }

    pub fn unlimited() -> Self {
        Self { max_steps: u64::MAX }
    }

    pub fn step(&self, world: &mut World) -> Result<()> {
        if world.step_count() >= self.max_steps {
            return Err(Error::Scenario(format!("step budget of {} steps exhausted", self.max_steps)));
        }
        world.step();
        Ok(())
    }

    pub fn run_for(&self, world: &mut World, seconds: f64) -> Result<()> {
        let n = (seconds / world.step_size()).round() as u64;
        for _ in 0..n {
            self.step(world)?;
        }
        Ok(())
    }

    /// Step until the active motion is terminal.
    pub fn wait_motion(&self, world: &mut World, timeout: f64) -> Result<MotionStatus> {
        let remaining = self.max_steps.saturating_sub(world.step_count()) as f64 * world.step_size();
        if remaining < timeout {
            let status = wait_motion_done(world, remaining);
            return status.map_err(|_| Error::Scenario(format!("step budget of {} steps exhausted", self.max_steps)));
        }
        wait_motion_done(world, timeout)
    }
}

/// The in-memory contents of a run directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFiles {
    pub run: KeyValues,
    pub scene_yaml: String,
    pub trajectory: String,
    pub skin: String,
    /// Exercise-specific files, e.g. an error series.
    pub extra: Vec<(String, String)>,
    pub report: Option<String>,
}

impl RunFiles {
    pub fn extra(&self, name: &str) -> Option<&str> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<(&str, &str)> = vec![
            (RUN_FILE, ""),
            (SCENE_FILE, &self.scene_yaml),
            (TRAJECTORY_FILE, &self.trajectory),
            (SKIN_FILE, &self.skin),
        ];
        let run = self.run.to_text();
        files[0].1 = &run;
        if let Some(r) = &self.report {
            files.push((REPORT_FILE, r));
        }
        for (n, c) in &self.extra {
            files.push((n, c));
        }
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Read the files `grade_log` needs; exercise series files are optional.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let run = KeyValues::read(&dir.join(RUN_FILE))?;
        let mut files = Self {
            run,
            scene_yaml: logs::read_text(&dir.join(SCENE_FILE))?,
            trajectory: logs::read_text(&dir.join(TRAJECTORY_FILE))?,
            skin: logs::read_text(&dir.join(SKIN_FILE))?,
            extra: Vec::new(),
            report: None,
        };
        for e in Exercise::ALL {
            if let Some(name) = e.series_file() {
                let p = dir.join(name);
                if p.exists() {
                    files.extra.push((name.to_string(), logs::read_text(&p)?));
                }
            }
        }
        Ok(files)
    }

    pub fn trajectory_table(&self) -> Result<NumericTable> {
        NumericTable::parse(&self.trajectory)
    }

    pub fn scene(&self) -> Result<SceneConfig> {
        SceneConfig::from_yaml(&self.scene_yaml)
    }
}

/// Outcome of [`execute`]: the final world and the files of the run.
#[derive(Debug)]
pub struct RunOutput {
    pub world: World,
    pub files: RunFiles,
    pub report: Option<GradeReport>,
    /// The scenario error that ended the run early, if any. The files
    /// still hold everything logged up to that point.
    pub failure: Option<Error>,
}

impl RunOutput {
    /// The grade report, or the scenario error.
    pub fn into_report(self) -> Result<GradeReport> {
        match (self.failure, self.report) {
            (Some(e), _) => Err(e),
            (None, Some(r)) => Ok(r),
            (None, None) => Err(Error::Scenario("idle runs are not graded".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub sim_time: f64,
    pub pass: Option<bool>,
}

/// Run a scene config (text, with relative paths resolved against `base`)
/// with an exercise's reference controller, or idle for `budget` steps.
/// Logging is always on.
pub fn execute(
    config_text: &str,
    base: &Path,
    exercise: Option<Exercise>,
    seed: u64,
    budget: u64,
    realtime_factor: f64,
) -> Result<RunOutput> {
    let cfg = scene::read_config(config_text, base)?;
    let mut world = scene::build_world(&cfg)?;
    world.enable_log();
    world.set_realtime_factor(realtime_factor);
    let budget = Budget::new(budget);

    let mut files = RunFiles {
        scene_yaml: config_text.to_string(),
        ..RunFiles::default()
    };
    files.run.set("exercise", exercise.map_or("idle", Exercise::name));
    files.run.set("seed", seed);
    files.run.set("step_size", world.step_size());
    files.run.set("step_budget", budget.max_steps);

    let outcome = match exercise {
        None => {
            for _ in 0..budget.max_steps {
                world.step();
            }
            Ok(())
        }
        Some(Exercise::Push) => push::run(&mut world, &budget, &mut files),
        Some(Exercise::Smooth) => smooth::run(&mut world, &budget, &mut files),
        Some(Exercise::Gaze) => gaze::run(&mut world, &budget, &mut files),
        Some(Exercise::Avoidance) => avoidance::run(&mut world, seed, &budget, &mut files),
        Some(Exercise::Grasp) => grasp::run(&mut world, seed, &budget, &mut files),
    };
    files.run.set("steps", world.step_count());
    files.run.set("sim_time", world.sim_time());
    let log = world.take_log().unwrap_or_default();
    files.trajectory = log.trajectory;
    files.skin = log.skin;

    let (report, failure) = match (outcome, exercise) {
        (Err(e), _) => {
            files.run.set("error", &e);
            (None, Some(e))
        }
        (Ok(()), Some(e)) => {
            let r = grade_files(e, &files)?;
            files.report = Some(r.to_text());
            (Some(r), None)
        }
        (Ok(()), None) => (None, None),
    };
    Ok(RunOutput {
        world,
        files,
        report,
        failure,
    })
}

/// Run one shipped exercise scenario in memory.
pub fn run_exercise(exercise: Exercise, seed: u64) -> Result<RunOutput> {
    let path = exercise.scene_path();
    let text = logs::read_text(&path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    execute(&text, base, Some(exercise), seed, exercise.default_steps(), 0.0)
}

/// The `simulate` command: run and write the run directory.
pub fn simulate(manifest: &RunManifest) -> Result<RunSummary> {
    manifest.validate()?;
    let text = logs::read_text(&manifest.config)?;
    let base = manifest.config.parent().unwrap_or(Path::new("."));
    let out = execute(
        &text,
        base,
        manifest.exercise,
        manifest.seed,
        manifest.budget(),
        manifest.realtime_factor,
    )?;
    out.files.write_dir(&manifest.log_dir)?;
    if let Some(e) = out.failure {
        return Err(e);
    }
    Ok(RunSummary {
        steps: out.world.step_count(),
        sim_time: out.world.sim_time(),
        pass: out.report.map(|r| r.pass),
    })
}

/// Grade a run directory offline.
pub fn grade_log(exercise: Exercise, dir: &Path) -> Result<GradeReport> {
    grade_files(exercise, &RunFiles::read_dir(dir)?)
}

/// Grade in-memory run files. Idle runs can be graded by any exercise whose
/// grader only needs the scene and the trajectory.
pub fn grade_files(exercise: Exercise, files: &RunFiles) -> Result<GradeReport> {
    let logged = files.run.require("exercise")?;
    if logged != exercise.name() && logged != "idle" {
        return Err(Error::SchemaMismatch(format!(
            "log was recorded for `{logged}`, not `{exercise}`"
        )));
    }
    match exercise {
        Exercise::Push => push::grade_files(files),
        Exercise::Smooth => smooth::grade_files(files),
        Exercise::Gaze => gaze::grade_files(files),
        Exercise::Avoidance => avoidance::grade_files(files),
        Exercise::Grasp => grasp::grade_files(files),
    }
}

fn collision_shape(spec: &ObjectSpec) -> Result<Shape> {
    match &spec.shape {
        ObjectShape::Sphere { radius } => Ok(Shape::Sphere { radius: *radius }),
        ObjectShape::Box { half_extents } => Ok(Shape::Box {
            half_extents: *half_extents,
        }),
        ObjectShape::Mesh { .. } => Err(Error::Scenario(format!(
            "object `{}` must be a sphere or box to be graded",
            spec.name
        ))),
    }
}

/// The `table` and `ball` objects of a scene.
fn table_and_ball(cfg: &SceneConfig) -> Result<(&ObjectSpec, &ObjectSpec)> {
    let find = |n: &str| {
        cfg.objects
            .iter()
            .find(|o| o.name == n)
            .ok_or_else(|| Error::Scenario(format!("scene has no `{n}` object")))
    };
    Ok((find("table")?, find("ball")?))
}

fn ball_radius(ball: &ObjectSpec) -> Result<f64> {
    match ball.shape {
        ObjectShape::Sphere { radius } => Ok(radius),
        _ => Err(Error::Scenario("`ball` must be a sphere".into())),
    }
}

/// Ball centre positions per trajectory row.
fn object_positions(table: &NumericTable, name: &str) -> Result<Vec<nalgebra::Vector3<f64>>> {
    let (x, y, z) = (
        table.column(&format!("{name}_x"))?,
        table.column(&format!("{name}_y"))?,
        table.column(&format!("{name}_z"))?,
    );
    Ok(table
        .rows
        .iter()
        .map(|r| nalgebra::Vector3::new(r[x], r[y], r[z]))
        .collect())
}

/// Index of the first row after the robot's last motion, where every
/// `|qd| < threshold` from then on.
fn settled_from(table: &NumericTable, threshold: f64) -> usize {
    let qd = table.columns_with_prefix("qd_");
    table
        .rows
        .iter()
        .rposition(|r| qd.iter().any(|&c| r[c].abs() >= threshold))
        .map_or(0, |i| i + 1)
}

/// Hand orientation for table-top work: the hanging-hand frame pitched
/// forward by `tilt` about world y, so the fingers point forward and down
/// and the finger/thumb axis stays along world y.
pub fn tilted_hand(tilt: f64) -> nalgebra::UnitQuaternion<f64> {
    crate::pose::axis_angle(&nalgebra::Vector3::y(), -tilt)
}

/// Issue a motion and wait for it; rejections become scenario errors.
fn run_motion(world: &mut World, budget: &Budget, what: &str, status: MotionStatus, timeout: f64) -> Result<MotionStatus> {
    if status.is_rejected() {
        return Err(Error::Scenario(format!("{what}: {}", status.detail)));
    }
    budget.wait_motion(world, timeout)
}

fn fmt_vec(v: &nalgebra::Vector3<f64>) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

fn parse_vec(kv: &KeyValues, key: &str) -> Result<nalgebra::Vector3<f64>> {
    let s = kv.require(key)?;
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("`{key}` is not a vector: `{s}`")))?;
    if parts.len() != 3 {
        return Err(Error::Parse(format!("`{key}` needs 3 components")));
    }
    Ok(nalgebra::Vector3::new(parts[0], parts[1], parts[2]))
}
