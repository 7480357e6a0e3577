//! Headless, deterministic humanoid simulator with raycast tactile skin,
//! eye cameras, joint/Cartesian control and graded exercises.

pub mod cli;
pub mod control;
pub mod error;
pub mod exercises;
pub mod geometry;
pub mod kinematics;
pub mod model;
pub mod pose;
pub mod scene;
pub mod skin;
pub mod vision;
pub mod world;

pub use error::{Error, Result};
pub use pose::Pose;
pub use world::World;
