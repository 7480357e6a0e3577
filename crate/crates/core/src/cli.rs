//! Command-line entry points.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::exercises::{self, Exercise, RunManifest};
use crate::model::{generate_skin_layout, write_skin_layout, DEFAULT_SKIN_PARTS};
use crate::scene;
use crate::vision::{render_camera, write_pgm16_depth, write_ppm};

#[derive(Debug, Parser)]
#[command(name = "humsim", version, about = "Headless humanoid simulator with tactile skin and graded exercises")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scene, optionally with an exercise's reference controller, and write logs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// push, smooth, gaze, avoidance, grasp, or idle.
        #[arg(long, default_value = "idle")]
        exercise: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Step budget (default: 240 for idle runs, per-exercise otherwise).
        #[arg(long)]
        steps: Option<u64>,
        /// Wall-clock throttle; 0 runs as fast as possible.
        #[arg(long = "realtime-factor", default_value_t = 0.0)]
        realtime_factor: f64,
        #[arg(long)]
        log: PathBuf,
    },
    /// Grade the logs of a previous `simulate` run; exit code 0 iff it passes.
    Grade {
        exercise: String,
        #[arg(long)]
        log: PathBuf,
    },
    /// Render one eye camera to `<out>.ppm` (RGB) and `<out>.pgm` (depth).
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        camera: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the default taxel layout for a robot description.
    Skin {
        #[arg(long)]
        robot: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn with_ext(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate {
            config,
            exercise,
            seed,
            steps,
            realtime_factor,
            log,
        } => {
            let exercise = if exercise == "idle" {
                None
            } else {
                Some(exercise.parse::<Exercise>()?)
            };
            let manifest = RunManifest {
                config,
                exercise,
                seed,
                steps,
                realtime_factor,
                log_dir: log,
            };
            let summary = exercises::simulate(&manifest)?;
            println!("steps={}", summary.steps);
            println!("sim_time={}", summary.sim_time);
            Ok(0)
        }
        Command::Grade { exercise, log } => {
            let exercise = exercise.parse::<Exercise>()?;
            let report = exercises::grade_log(exercise, &log)?;
            print!("{}", report.to_text());
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Render { config, camera, out } => {
            let world = scene::load_world(&config)?;
            let img = render_camera(&world, &camera)?;
            write_ppm(&with_ext(&out, "ppm"), &img.rgb)?;
            write_pgm16_depth(&with_ext(&out, "pgm"), &img.depth)?;
            Ok(0)
        }
        Command::Skin { robot, out, seed } => {
            let model = scene::load_robot(&robot.unwrap_or_else(scene::default_robot_path))?;
            let layout = generate_skin_layout(&model, DEFAULT_SKIN_PARTS, seed)?;
            write_skin_layout(&out, &layout)?;
            println!("taxels={}", layout.taxel_count());
            Ok(0)
        }
    }
}
