//! In-memory CSV logs, written out with [`SimLog::write_dir`].
//!
//! The trajectory columns are fixed by the first recorded step; objects
//! added later are not logged there.

use std::fmt::Write as _;
use std::path::Path;

use super::World;
use crate::error::{Error, Result};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SKIN_FILE: &str = "skin.csv";
pub const SKIN_HEADER: &str = "sim_time,part,taxel_id,activation,x,y,z,nx,ny,nz";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLog {
    /// `sim_time,q_<joint>...,qd_<joint>...,ee_x,ee_y,ee_z,<obj>_x,_y,_z,_qw,_qx,_qy,_qz...`
    pub trajectory: String,
    pub skin: String,
    objects: usize,
}

impl SimLog {
    fn header(world: &World) -> String {
        let mut h = String::from("sim_time");
        for j in world.model().actuated_joints() {
            write!(h, ",q_{}", j.name).unwrap();
        }
        for j in world.model().actuated_joints() {
            write!(h, ",qd_{}", j.name).unwrap();
        }
        h.push_str(",ee_x,ee_y,ee_z");
        for o in world.objects() {
            for c in ["x", "y", "z", "qw", "qx", "qy", "qz"] {
                write!(h, ",{}_{c}", o.spec.name).unwrap();
            }
        }
        h.push('\n');
        h
    }

    pub(crate) fn record(&mut self, world: &World) {
        if self.trajectory.is_empty() {
            self.trajectory = Self::header(world);
            self.objects = world.objects().len();
            self.skin = format!("{SKIN_HEADER}\n");
        }
        let t = world.sim_time();
        let row = &mut self.trajectory;
        write!(row, "{t}").unwrap();
        for v in world.q().iter().chain(world.q_dot()) {
            write!(row, ",{v}").unwrap();
        }
        let ee = world.link_pose(world.end_effector()).position;
        write!(row, ",{},{},{}", ee.x, ee.y, ee.z).unwrap();
        for o in &world.objects()[..self.objects] {
            let p = o.pose.position;
            let [w, x, y, z] = o.pose.wxyz();
            write!(row, ",{},{},{},{w},{x},{y},{z}", p.x, p.y, p.z).unwrap();
        }
        row.push('\n');
        for (part, readings) in &world.skin_state().parts {
            for (id, r) in readings {
                let (p, n) = (r.position, r.normal);
                writeln!(
                    self.skin,
                    "{t},{part},{id},{},{},{},{},{},{},{}",
                    r.activation, p.x, p.y, p.z, n.x, n.y, n.z
                )
                .unwrap();
            }
        }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [(TRAJECTORY_FILE, &self.trajectory), (SKIN_FILE, &self.skin)] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
