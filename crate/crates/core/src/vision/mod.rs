//! Pinhole eye cameras rendered by raycasting, plus deprojection and blob
//! detection.
//!
//! Camera frame: Z forward, X right, Y down. Pixel `(u, v)` samples the ray
//! through `((u - cx) / f, (v - cy) / f, 1)`, so pixel indices are the
//! continuous image coordinates of the pixel centres and [`deproject_pixel`]
//! is the exact inverse of [`project_point`].

mod blob;
mod netpbm;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::world::World;

pub use blob::{detect_color_blob, Blob};
pub use netpbm::{read_pgm16_depth, read_ppm, write_pgm16_depth, write_ppm};

/// Depth value for pixels whose ray hits nothing.
pub const DEPTH_MISS: f64 = f64::INFINITY;

const MAX_RANGE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub name: String,
    pub link: String,
    /// Optical frame relative to the link frame.
    pub pose: Pose,
    pub width: u32,
    pub height: u32,
    pub focal_length: f64,
}

impl CameraModel {
    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; 3 * width as usize * height as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        let i = 3 * (v as usize * self.width as usize + u as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, u: u32, v: u32, c: [u8; 3]) {
        let i = 3 * (v as usize * self.width as usize + u as usize);
        self.data[i..i + 3].copy_from_slice(&c);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    /// Row-major depth along the optical axis (metres), [`DEPTH_MISS`] for background.
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[v as usize * self.width as usize + u as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub rgb: RgbImage,
    pub depth: DepthImage,
}

/// Camera-frame point for pixel `(u, v)` at optical-axis depth `depth`.
pub fn deproject_pixel(camera: &CameraModel, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>> {
    if !depth.is_finite() || depth <= 0.0 {
        return Err(Error::NonFiniteDepth(depth));
    }
    let (cx, cy) = camera.principal_point();
    let f = camera.focal_length;
    Ok(Vector3::new((u - cx) * depth / f, (v - cy) * depth / f, depth))
}

/// Pixel coordinates of a camera-frame point in front of the camera.
pub fn project_point(camera: &CameraModel, p: &Vector3<f64>) -> Option<(f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    let (cx, cy) = camera.principal_point();
    let f = camera.focal_length;
    Some((cx + f * p.x / p.z, cy + f * p.y / p.z))
}

/// World pose of a camera's optical frame.
pub fn camera_pose(world: &World, camera: &CameraModel) -> Result<Pose> {
    let link = world.model().link_id(&camera.link)?;
    Ok(world.link_pose(link).compose(&camera.pose))
}

/// Raycast one RGB + depth frame. Flat shading: each pixel takes the colour
/// of the nearest body hit; the camera's own link is invisible to it.
pub fn render_camera(world: &World, camera: &str) -> Result<ImagePair> {
    if !world.flags().eyes {
        return Err(Error::Disabled("eyes"));
    }
    let cam = world.model().camera(camera)?.clone();
    let own_link = world.model().link_id(&cam.link)?;
    let pose = camera_pose(world, &cam)?;
    let colliders = world.colliders();
    let (w, h) = (cam.width as usize, cam.height as usize);
    let (cx, cy) = cam.principal_point();
    let f = cam.focal_length;

    let rows: Vec<(Vec<u8>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rgb = vec![0u8; 3 * w];
            let mut depth = vec![DEPTH_MISS; w];
            for u in 0..w {
                let local = Vector3::new((u as f64 - cx) / f, (v as f64 - cy) / f, 1.0);
                let norm = local.norm();
                let dir = pose.transform_vector(&(local / norm));
                let mut best: Option<(f64, [u8; 3])> = None;
                for c in colliders {
                    if c.body.link() == Some(own_link) {
                        continue;
                    }
                    let limit = best.map_or(MAX_RANGE, |b| b.0);
                    if !c.aabb.hit_by_segment(&pose.position, &dir, limit) {
                        continue;
                    }
                    if let Some(t) = c.shape.raycast(&c.pose, &pose.position, &dir, limit) {
                        if best.is_none_or(|b| t < b.0) {
                            best = Some((t, c.color));
                        }
                    }
                }
                if let Some((t, color)) = best {
                    depth[u] = t / norm;
                    let color = if color == [0, 0, 0] { [1, 1, 1] } else { color };
                    rgb[3 * u..3 * u + 3].copy_from_slice(&color);
                }
            }
            (rgb, depth)
        })
        .collect();

    let mut rgb = RgbImage::new(cam.width, cam.height);
    let mut depth = DepthImage {
        width: cam.width,
        height: cam.height,
        data: Vec::with_capacity(w * h),
    };
    for (v, (r, d)) in rows.into_iter().enumerate() {
        rgb.data[3 * w * v..3 * w * (v + 1)].copy_from_slice(&r);
        depth.data.extend(d);
    }
    Ok(ImagePair { rgb, depth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel {
            name: "c".into(),
            link: "l".into(),
            pose: Pose::identity(),
            width: 160,
            height: 120,
            focal_length: 130.0,
        }
    }

    #[test]
    fn principal_point_deprojects_onto_axis() {
        let p = deproject_pixel(&cam(), 80.0, 60.0, 2.0).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn unit_slope_ray() {
        let p = deproject_pixel(&cam(), 80.0 + 130.0, 60.0, 1.5).unwrap();
        assert_eq!(p, Vector3::new(1.5, 0.0, 1.5));
    }

    #[test]
    fn rejects_bad_depth() {
        assert!(deproject_pixel(&cam(), 1.0, 1.0, f64::INFINITY).is_err());
        assert!(deproject_pixel(&cam(), 1.0, 1.0, f64::NAN).is_err());
        assert!(deproject_pixel(&cam(), 1.0, 1.0, 0.0).is_err());
    }
}
