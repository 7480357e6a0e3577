//! Locating and loading the shipped assets and scene files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{parse_robot_description, read_skin_layout, ObjectShape, RobotModel, SceneConfig};
use crate::world::World;

/// Overrides the asset directory.
pub const ASSETS_ENV: &str = "HUMSIM_ASSETS";

pub fn asset_dir() -> PathBuf {
    std::env::var_os(ASSETS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets")))
}

pub fn default_robot_path() -> PathBuf {
    asset_dir().join("humanoid.urdf")
}

pub fn default_skin_dir() -> PathBuf {
    asset_dir().join("skin")
}

/// Path of a shipped scene file, e.g. `scene_path("push")`.
pub fn scene_path(name: &str) -> PathBuf {
    asset_dir().join("scenes").join(format!("{name}.yaml"))
}

pub fn load_robot(path: &Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_robot_description(&text)
}

pub fn load_default_robot() -> Result<Arc<RobotModel>> {
    load_robot(&default_robot_path()).map(Arc::new)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parse a scene config and resolve its relative paths against `base`.
pub fn read_config(text: &str, base: &Path) -> Result<SceneConfig> {
    let mut cfg = SceneConfig::from_yaml(text)?;
    cfg.robot = cfg.robot.map(|p| resolve(base, &p));
    cfg.skin_layout = cfg.skin_layout.map(|p| resolve(base, &p));
    for o in &mut cfg.objects {
        if let ObjectShape::Mesh { file } = &mut o.shape {
            *file = resolve(base, file);
        }
    }
    Ok(cfg)
}

/// Build a world from a parsed config, loading the robot and skin it names
/// (or the shipped defaults).
pub fn build_world(cfg: &SceneConfig) -> Result<World> {
    let robot = cfg.robot.clone().unwrap_or_else(default_robot_path);
    let model = Arc::new(load_robot(&robot)?);
    let skin = if cfg.flags.skin {
        let dir = cfg.skin_layout.clone().unwrap_or_else(default_skin_dir);
        Some(read_skin_layout(&dir)?)
    } else {
        None
    };
    World::new(model, cfg, skin)
}

pub fn load_config(path: &Path) -> Result<SceneConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_config(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn load_world(path: &Path) -> Result<World> {
    build_world(&load_config(path)?)
}
