//! Move limbs away from probes touching the skin.

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Budget, Exercise, GradeReport, RunFiles, SkinTimeline, Unit};
use crate::control::{cluster_touches, rrmc, set_velocity, RrmcMethod};
use crate::error::{Error, Result};
use crate::geometry::{contact, Shape};
use crate::kinematics::point_jacobian;
use crate::model::ObjectSpec;
use crate::pose::Pose;
use crate::world::World;

/// Retreat speed along the touch normal (m/s).
pub const AVOIDANCE_SPEED: f64 = 0.1;
/// Single-linkage distance for grouping active taxels (m).
pub const CLUSTER_THRESHOLD: f64 = 0.02;
/// Every contact must be cleared this long after onset (s).
pub const AVOIDANCE_CLEAR_TIME: f64 = 2.0;
/// Activations above this count as saturated...
pub const SATURATION_ACTIVATION: u8 = 250;
/// ...and may not stay saturated longer than this (s).
pub const SATURATION_TIME: f64 = 0.5;

const PROBE_RADIUS: f64 = 0.02;
/// Gap between a fresh probe's surface and its taxel.
const PROBE_GAP: f64 = 0.001;
const FIRST_ONSET: f64 = 0.5;
const WAVE_PERIOD: f64 = 3.0;
const PLACEMENT_TRIES: usize = 200;

/// Which skin parts get touched and whether all at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Difficulty {
    pub limbs: Vec<String>,
    /// All limbs touched in one wave; otherwise one wave per limb.
    pub simultaneous: bool,
}

impl Difficulty {
    pub fn single() -> Self {
        Self {
            limbs: vec!["right_forearm".into()],
            simultaneous: false,
        }
    }

    pub fn double() -> Self {
        Self {
            limbs: vec!["right_forearm".into(), "left_upper_arm".into()],
            simultaneous: true,
        }
    }

    /// Even seeds run [`Difficulty::single`], odd seeds [`Difficulty::double`].
    pub fn for_seed(seed: u64) -> Self {
        if seed % 2 == 0 {
            Self::single()
        } else {
            Self::double()
        }
    }

    fn waves(&self) -> Vec<Vec<&str>> {
        if self.simultaneous {
            vec![self.limbs.iter().map(String::as_str).collect()]
        } else {
            self.limbs.iter().map(|l| vec![l.as_str()]).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvoidanceController {
    /// Never moves.
    Idle,
    Reference(RrmcMethod),
}

/// Joint velocities moving every touched part against its touch normal.
///
/// Each touch event contributes the resolved-rate solution of the linear
/// Jacobian rows at the touch centroid; the sum is scaled down uniformly to
/// respect joint velocity limits. No touch gives a zero command.
pub fn reference_avoidance_command(world: &World, method: RrmcMethod) -> Result<Vec<f64>> {
    let model = world.model();
    let mut v = vec![0.0; model.dof()];
    let Some(skin) = world.skin_model() else {
        return Err(Error::Disabled("skin"));
    };
    for event in cluster_touches(world.skin_state(), CLUSTER_THRESHOLD) {
        let link = skin
            .part_link(&event.part)
            .ok_or_else(|| Error::Scenario(format!("unknown skin part `{}`", event.part)))?;
        let jac = point_jacobian(model, world.link_poses(), link, &event.centroid);
        let lin = jac.matrix.rows(0, 3).into_owned();
        let xdot = -event.normal * AVOIDANCE_SPEED;
        let dq = rrmc(&lin, &DVector::from_column_slice(xdot.as_slice()), method)?;
        for (k, &d) in jac.dofs.iter().enumerate() {
            v[d] += dq[k];
        }
    }
    let scale = model
        .actuated_joints()
        .zip(&v)
        .map(|(j, x)| x.abs() / j.max_velocity)
        .fold(1.0, f64::max);
    v.iter_mut().for_each(|x| *x /= scale);
    Ok(v)
}

/// A probe pressed against one skin part at `onset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeContact {
    pub part: String,
    pub onset: f64,
    pub object: usize,
    pub taxel_id: u32,
}

fn park(i: usize) -> Vector3<f64> {
    Vector3::new(10.0 + i as f64, 10.0, 10.0)
}

/// Put probe `object` 1 mm off a random taxel of `part`, never overlapping
/// any collider.
fn place_probe(world: &mut World, rng: &mut ChaCha8Rng, part: &str, object: usize) -> Result<u32> {
    let skin = world.skin_model().ok_or(Error::Disabled("skin"))?;
    let link = skin
        .part_link(part)
        .ok_or_else(|| Error::Scenario(format!("unknown skin part `{part}`")))?;
    let taxels = skin.taxels(part).unwrap_or_default().to_vec();
    if taxels.is_empty() {
        return Err(Error::Scenario(format!("skin part `{part}` has no taxels")));
    }
    let frame = world.link_pose(link);
    let probe = Shape::Sphere { radius: PROBE_RADIUS };
    for _ in 0..PLACEMENT_TRIES {
        let t = &taxels[rng.gen_range(0..taxels.len())];
        let p = frame.transform_point(&t.local_position);
        let n = frame.transform_vector(&t.local_normal);
        let pose = Pose::from_translation(p + n * (PROBE_RADIUS + PROBE_GAP));
        let clear = world
            .colliders()
            .iter()
            .filter(|c| c.body.object() != Some(object))
            .all(|c| contact(&probe, &pose, &c.shape, &c.pose).is_none());
        if clear {
            world.set_object_pose(object, pose);
            return Ok(t.id);
        }
    }
    Err(Error::Scenario(format!("could not place a probe on `{part}`")))
}

/// Run the probe waves with `controller`, returning the contacts and the
/// per-step skin timeline. Probes are added up front, parked out of reach,
/// so the trajectory log lists them.
pub fn avoidance_scenario(
    world: &mut World,
    controller: AvoidanceController,
    difficulty: &Difficulty,
    seed: u64,
    budget: &Budget,
) -> Result<(Vec<ProbeContact>, SkinTimeline)> {
    if world.skin_model().is_none() {
        return Err(Error::Disabled("skin"));
    }
    let waves = difficulty.waves();
    let mut probes = Vec::new();
    for (w, wave) in waves.iter().enumerate() {
        for (k, _) in wave.iter().enumerate() {
            let i = probes.len();
            let spec = ObjectSpec::sphere(&format!("probe_{w}_{k}"), PROBE_RADIUS, park(i)).with_color([255, 160, 0]);
            probes.push(world.add_object(spec)?);
        }
    }
    let onsets: Vec<f64> = (0..waves.len()).map(|w| FIRST_ONSET + WAVE_PERIOD * w as f64).collect();
    let end = onsets.last().copied().unwrap_or(0.0) + AVOIDANCE_CLEAR_TIME + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut contacts = Vec::new();
    let mut timeline = SkinTimeline::default();
    let mut next_wave = 0;
    let h = world.step_size();
    while world.sim_time() < end - 0.5 * h {
        if next_wave < waves.len() && world.sim_time() >= onsets[next_wave] - 0.5 * h {
            let mut obj = probes.iter().skip(contacts.len());
            for part in &waves[next_wave] {
                let object = *obj.next().unwrap();
                let taxel_id = place_probe(world, &mut rng, part, object)?;
                contacts.push(ProbeContact {
                    part: part.to_string(),
                    onset: world.sim_time(),
                    object,
                    taxel_id,
                });
            }
            next_wave += 1;
        }
        let v = match controller {
            AvoidanceController::Idle => vec![0.0; world.model().dof()],
            AvoidanceController::Reference(method) => reference_avoidance_command(world, method)?,
        };
        let status = set_velocity(world, v)?;
        if status.is_rejected() {
            return Err(Error::Scenario(status.detail));
        }
        budget.step(world)?;
        timeline.push(world.sim_time(), world.skin_state());
    }
    Ok((contacts, timeline))
}

/// Grade contacts against a skin timeline.
pub fn grade_avoidance(contacts: &[ProbeContact], timeline: &SkinTimeline, step_size: f64) -> GradeReport {
    let mut metrics = Vec::new();
    let mut cleared = 0;
    for (i, c) in contacts.iter().enumerate() {
        let after = timeline.times.iter().enumerate().filter(|(_, &t)| t > c.onset);
        let mut touched = false;
        let mut clear_time = f64::INFINITY;
        for (step, &t) in after {
            if t > c.onset + AVOIDANCE_CLEAR_TIME + 0.5 * step_size {
                break;
            }
            let a = timeline.max_at(&c.part, step);
            if a > 0 {
                touched = true;
            } else if touched {
                clear_time = t - c.onset;
                break;
            }
        }
        if clear_time.is_finite() {
            cleared += 1;
        }
        metrics.push((format!("contact_{i}_touched"), touched as u8 as f64));
        metrics.push((format!("contact_{i}_clear_time"), clear_time));
    }
    let mut longest: f64 = 0.0;
    for series in timeline.max_by_part.values() {
        let mut run = 0usize;
        for &a in series {
            run = if a > SATURATION_ACTIVATION { run + 1 } else { 0 };
            longest = longest.max(run as f64 * step_size);
        }
    }
    metrics.push(("longest_saturation".into(), longest));
    let all = contacts.len().max(1) as f64;
    let pass = !contacts.is_empty() && cleared == contacts.len() && longest <= SATURATION_TIME;
    let mut r = GradeReport::new(Exercise::Avoidance, cleared as f64 / all, Unit::Dimensionless, pass);
    r.metrics = metrics;
    r
}

/// Spawn probes against the difficulty's limbs, run `controller`, and grade:
/// every contact's part must return to zero activation within
/// [`AVOIDANCE_CLEAR_TIME`] of onset, and no activation may exceed
/// [`SATURATION_ACTIVATION`] for longer than [`SATURATION_TIME`].
pub fn run_avoidance_scenario(
    world: &mut World,
    controller: AvoidanceController,
    difficulty: &Difficulty,
    seed: u64,
) -> Result<GradeReport> {
    let (contacts, timeline) = avoidance_scenario(world, controller, difficulty, seed, &Budget::unlimited())?;
    Ok(grade_avoidance(&contacts, &timeline, world.step_size()))
}

pub(super) fn run(world: &mut World, seed: u64, budget: &Budget, files: &mut RunFiles) -> Result<()> {
    let difficulty = Difficulty::for_seed(seed);
    let controller = AvoidanceController::Reference(RrmcMethod::PseudoInverse);
    let (contacts, _) = avoidance_scenario(world, controller, &difficulty, seed, budget)?;
    files.run.set("contacts", contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        files.run.set(&format!("contact_{i}_part"), &c.part);
        files.run.set(&format!("contact_{i}_onset"), c.onset);
        files.run.set(&format!("contact_{i}_taxel"), c.taxel_id);
    }
    Ok(())
}

pub(super) fn grade_files(files: &RunFiles) -> Result<GradeReport> {
    let kv = &files.run;
    let n: usize = kv
        .require("contacts")?
        .parse()
        .map_err(|_| Error::Parse("bad contact count".into()))?;
    let contacts = (0..n)
        .map(|i| {
            Ok(ProbeContact {
                part: kv.require(&format!("contact_{i}_part"))?.to_string(),
                onset: kv.require_f64(&format!("contact_{i}_onset"))?,
                object: 0,
                taxel_id: kv.require_f64(&format!("contact_{i}_taxel"))? as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let times = files.trajectory_table()?.values("sim_time")?;
    let timeline = SkinTimeline::from_skin_log(times, &files.skin)?;
    Ok(grade_avoidance(&contacts, &timeline, kv.require_f64("step_size")?))
}
