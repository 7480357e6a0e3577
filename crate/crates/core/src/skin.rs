//! Raycast tactile skin.
//!
//! Every taxel casts a short ray from its surface point along its outward
//! normal. A hit at distance `d` within the ray length `L` activates the
//! taxel with `round(255 * (1 - d / L))`; the taxel's own link is ignored.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::model::{RobotModel, SkinLayout, Taxel};
use crate::world::World;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PartRuntime {
    pub name: String,
    pub link: usize,
    pub taxels: Vec<Taxel>,
    /// Bounding box of the taxel positions in the link frame.
    pub local_aabb: Aabb,
    pub max_ray: f64,
}

/// Skin layout bound to the links of a robot model.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinModel {
    pub(crate) parts: Vec<PartRuntime>,
}

impl SkinModel {
    pub fn new(model: &RobotModel, layout: &SkinLayout) -> Result<Self> {
        let mut parts = Vec::with_capacity(layout.parts.len());
        for p in &layout.parts {
            let link = model.link_id(&p.link)?;
            let mut local_aabb = Aabb::empty();
            let mut max_ray: f64 = 0.0;
            for t in &p.taxels {
                if t.link != p.link {
                    return Err(Error::Validation(format!("taxel {} of `{}` is on another link", t.id, p.name)));
                }
                if !(t.ray_length > 0.0) || (t.local_normal.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::Validation(format!("taxel {} of `{}` is malformed", t.id, p.name)));
                }
                local_aabb.grow(&t.local_position);
                max_ray = max_ray.max(t.ray_length);
            }
            parts.push(PartRuntime {
                name: p.name.clone(),
                link,
                taxels: p.taxels.clone(),
                local_aabb,
                max_ray,
            });
        }
        Ok(Self { parts })
    }

    pub fn part_names(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().map(|p| p.name.as_str())
    }

    pub fn taxel_count(&self) -> usize {
        self.parts.iter().map(|p| p.taxels.len()).sum()
    }

    pub fn part_link(&self, part: &str) -> Option<usize> {
        self.parts.iter().find(|p| p.name == part).map(|p| p.link)
    }

    pub fn taxels(&self, part: &str) -> Option<&[Taxel]> {
        self.parts.iter().find(|p| p.name == part).map(|p| p.taxels.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxelReading {
    pub activation: u8,
    /// World-frame taxel position and outward normal.
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Active taxels only, keyed by part name then taxel id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkinState {
    pub parts: BTreeMap<String, BTreeMap<u32, TaxelReading>>,
}

impl SkinState {
    pub fn active_count(&self) -> usize {
        self.parts.values().map(|p| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.active_count() == 0
    }

    pub fn part(&self, name: &str) -> Option<&BTreeMap<u32, TaxelReading>> {
        self.parts.get(name)
    }
}

/// A part that survived the AABB prefilter, with the colliders its rays can reach.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinPart {
    pub index: usize,
    pub name: String,
    pub link: usize,
    /// World AABB of the part's taxels inflated by the ray length.
    pub aabb: Aabb,
    /// Indices into [`World::colliders`].
    pub candidates: Vec<usize>,
}

/// `round_half_up(255 * (1 - d / L))`, zero at or beyond `L`.
pub fn activation_from_distance(d: f64, ray_length: f64) -> u8 {
    if !(d < ray_length) {
        return 0;
    }
    let x = 255.0 * (1.0 - d.max(0.0) / ray_length);
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Parts whose inflated AABB overlaps at least one collider not on their own link.
pub fn prefilter_skin_parts(world: &World) -> Vec<SkinPart> {
    let Some(skin) = world.skin_model() else {
        return Vec::new();
    };
    let colliders = world.colliders();
    skin.parts
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.taxels.is_empty())
        .filter_map(|(index, p)| {
            let aabb = p.local_aabb.transformed(&world.link_pose(p.link)).inflate(p.max_ray);
            let candidates: Vec<usize> = colliders
                .iter()
                .enumerate()
                .filter(|(_, c)| c.body.link() != Some(p.link) && c.aabb.overlaps(&aabb))
                .map(|(i, _)| i)
                .collect();
            (!candidates.is_empty()).then(|| SkinPart {
                index,
                name: p.name.clone(),
                link: p.link,
                aabb,
                candidates,
            })
        })
        .collect()
}

/// Cast every ray of the prefiltered parts in one parallel batch.
pub fn compute_skin_activations(world: &World) -> Result<SkinState> {
    if !world.flags().skin {
        return Err(Error::Disabled("skin"));
    }
    let Some(skin) = world.skin_model() else {
        return Ok(SkinState::default());
    };
    let parts = prefilter_skin_parts(world);
    let colliders = world.colliders();
    let rays: Vec<(usize, usize)> = parts
        .iter()
        .enumerate()
        .flat_map(|(k, p)| (0..skin.parts[p.index].taxels.len()).map(move |t| (k, t)))
        .collect();
    let hits: Vec<Option<(u8, Vector3<f64>, Vector3<f64>)>> = rays
        .par_iter()
        .map(|&(k, t)| {
            let part = &parts[k];
            let taxel = &skin.parts[part.index].taxels[t];
            let pose = world.link_pose(part.link);
            let origin = pose.transform_point(&taxel.local_position);
            let dir = pose.transform_vector(&taxel.local_normal);
            let mut best = taxel.ray_length;
            for &c in &part.candidates {
                let c = &colliders[c];
                if !c.aabb.hit_by_segment(&origin, &dir, best) {
                    continue;
                }
                if let Some(d) = c.shape.raycast(&c.pose, &origin, &dir, best) {
                    best = best.min(d);
                }
            }
            let a = activation_from_distance(best, taxel.ray_length);
            (a > 0).then_some((a, origin, dir))
        })
        .collect();
    let mut state = SkinState::default();
    for (&(k, t), hit) in rays.iter().zip(hits) {
        if let Some((activation, position, normal)) = hit {
            let part = &parts[k];
            let id = skin.parts[part.index].taxels[t].id;
            state.parts.entry(part.name.clone()).or_default().insert(
                id,
                TaxelReading {
                    activation,
                    position,
                    normal,
                },
            );
        }
    }
    Ok(state)
}
