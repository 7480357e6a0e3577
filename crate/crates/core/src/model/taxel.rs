use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Link, RobotModel};
use crate::error::{Error, Result};

/// Ray length used for the shipped skin (metres).
pub const DEFAULT_RAY_LENGTH: f64 = 0.005;

/// Skin parts of the shipped humanoid: (part, link, taxel count).
pub const DEFAULT_SKIN_PARTS: &[(&str, &str, usize)] = &[
    ("torso", "chest", 1000),
    ("left_upper_arm", "l_upper_arm", 500),
    ("right_upper_arm", "r_upper_arm", 500),
    ("left_forearm", "l_forearm", 500),
    ("right_forearm", "r_forearm", 500),
    ("left_thigh", "l_thigh", 300),
    ("right_thigh", "r_thigh", 300),
    ("left_shin", "l_shin", 300),
    ("right_shin", "r_shin", 300),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Taxel {
    pub id: u32,
    pub link: String,
    pub local_position: Vector3<f64>,
    pub local_normal: Vector3<f64>,
    pub ray_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkinPartLayout {
    pub name: String,
    pub link: String,
    pub taxels: Vec<Taxel>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkinLayout {
    pub parts: Vec<SkinPartLayout>,
}

impl SkinLayout {
    pub fn taxel_count(&self) -> usize {
        self.parts.iter().map(|p| p.taxels.len()).sum()
    }
}

/// Sample `count` taxels uniformly over the union surface of the link's
/// collision primitives. Points that fall inside another primitive of the
/// same link are resampled, so every taxel sits on the outer surface.
pub fn generate_taxel_layout(link: &Link, count: usize, seed: u64) -> Result<Vec<Taxel>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if link.collision.is_empty() {
        return Err(Error::InvalidParams(format!(
            "link `{}` has no collision primitives to place taxels on",
            link.name
        )));
    }
    let areas: Vec<f64> = link.collision.iter().map(|p| p.shape.surface_area()).collect();
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taxels = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while taxels.len() < count {
        attempts += 1;
        if attempts > 1000 * count {
            return Err(Error::InvalidParams(format!(
                "could not place taxels on `{}`: surface is fully enclosed",
                link.name
            )));
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut idx = areas.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                idx = i;
                break;
            }
            pick -= a;
        }
        let prim = &link.collision[idx];
        let (p, n) = prim.shape.sample_surface(&mut rng);
        let position = prim.origin.transform_point(&p);
        let normal = prim.origin.transform_vector(&n).normalize();
        let buried = link.collision.iter().enumerate().any(|(k, other)| {
            k != idx && other.shape.signed_distance(&other.origin, &position).0 < 0.0
        });
        if buried {
            continue;
        }
        taxels.push(Taxel {
            id: taxels.len() as u32,
            link: link.name.clone(),
            local_position: position,
            local_normal: normal,
            ray_length: DEFAULT_RAY_LENGTH,
        });
    }
    Ok(taxels)
}

/// One record per line: `id link x y z nx ny nz ray_len`; `#` starts a comment.
pub fn parse_taxel_layout(text: &str) -> Result<Vec<Taxel>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("taxel line {}: {what}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(bad("expected 9 fields"));
        }
        let id = fields[0].parse::<u32>().map_err(|_| bad("bad id"))?;
        let mut v = [0.0; 7];
        for (k, f) in fields[2..].iter().enumerate() {
            v[k] = f.parse::<f64>().map_err(|_| bad("bad number"))?;
        }
        let normal = Vector3::new(v[3], v[4], v[5]);
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(bad("normal is not unit length"));
        }
        if !(v[6] > 0.0) {
            return Err(bad("ray length must be positive"));
        }
        out.push(Taxel {
            id,
            link: fields[1].to_string(),
            local_position: Vector3::new(v[0], v[1], v[2]),
            local_normal: normal,
            ray_length: v[6],
        });
    }
    Ok(out)
}

pub fn write_taxel_layout(taxels: &[Taxel]) -> String {
    let mut s = String::from("# id link x y z nx ny nz ray_len\n");
    for t in taxels {
        let p = t.local_position;
        let n = t.local_normal;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            t.id, t.link, p.x, p.y, p.z, n.x, n.y, n.z, t.ray_length
        );
    }
    s
}

/// Generate a layout for `(part, link, count)` specs; part `i` uses seed `seed + i`.
pub fn generate_skin_layout(model: &RobotModel, parts: &[(&str, &str, usize)], seed: u64) -> Result<SkinLayout> {
    let mut out = Vec::with_capacity(parts.len());
    for (i, &(name, link, count)) in parts.iter().enumerate() {
        let l = &model.links[model.link_id(link)?];
        out.push(SkinPartLayout {
            name: name.to_string(),
            link: link.to_string(),
            taxels: generate_taxel_layout(l, count, seed.wrapping_add(i as u64))?,
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(SkinLayout { parts: out })
}

/// Write one `<part>.taxels` file per part into `dir`.
pub fn write_skin_layout(dir: &Path, layout: &SkinLayout) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for p in &layout.parts {
        let f = dir.join(format!("{}.taxels", p.name));
        std::fs::write(&f, write_taxel_layout(&p.taxels)).map_err(|e| Error::io(&f, e))?;
    }
    Ok(())
}

/// Load every `<part>.taxels` file in `dir`, sorted by part name.
pub fn read_skin_layout(dir: &Path) -> Result<SkinLayout> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "taxels"))
        .collect();
    files.sort();
    let mut parts = Vec::with_capacity(files.len());
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        let taxels = parse_taxel_layout(&text)?;
        let name = f.file_stem().unwrap().to_string_lossy().into_owned();
        let link = match taxels.first() {
            Some(t) => t.link.clone(),
            None => continue,
        };
        if let Some(t) = taxels.iter().find(|t| t.link != link) {
            return Err(Error::Validation(format!(
                "skin part `{name}` mixes links `{link}` and `{}`",
                t.link
            )));
        }
        parts.push(SkinPartLayout { name, link, taxels });
    }
    Ok(SkinLayout { parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::model::Primitive;
    use crate::pose::Pose;

    fn capsule_link() -> Link {
        Link {
            name: "arm".into(),
            collision: vec![Primitive {
                shape: Shape::Capsule {
                    radius: 0.03,
                    half_length: 0.08,
                },
                origin: Pose::from_xyz_rpy([0.0, 0.0, -0.1], [0.2, 0.0, 0.0]),
            }],
            visual_mesh: None,
        }
    }

    #[test]
    fn zero_count_is_empty() {
        assert!(generate_taxel_layout(&capsule_link(), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn no_primitives_is_error() {
        let link = Link {
            name: "bare".into(),
            collision: vec![],
            visual_mesh: None,
        };
        assert!(generate_taxel_layout(&link, 3, 1).is_err());
    }

    #[test]
    fn capsule_taxels_on_surface() {
        let link = capsule_link();
        let taxels = generate_taxel_layout(&link, 100, 7).unwrap();
        assert_eq!(taxels.len(), 100);
        let prim = &link.collision[0];
        // Independent signed distance: point-to-segment distance minus radius.
        let axis = prim.origin.axis(2);
        let a = prim.origin.position - axis * 0.08;
        let b = prim.origin.position + axis * 0.08;
        for t in &taxels {
            let ab = b - a;
            let s = ((t.local_position - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let closest = a + ab * s;
            let d = (t.local_position - closest).norm() - 0.03;
            assert!(d.abs() < 1e-9, "distance {d}");
            assert!((t.local_normal.norm() - 1.0).abs() < 1e-12);
            assert!(t.local_normal.dot(&(t.local_position - closest)) > 0.0);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let link = capsule_link();
        assert_eq!(
            generate_taxel_layout(&link, 50, 9).unwrap(),
            generate_taxel_layout(&link, 50, 9).unwrap()
        );
        assert_ne!(
            generate_taxel_layout(&link, 50, 9).unwrap(),
            generate_taxel_layout(&link, 50, 10).unwrap()
        );
    }

    #[test]
    fn union_surface_excludes_buried_points() {
        let link = Link {
            name: "blob".into(),
            collision: vec![
                Primitive {
                    shape: Shape::Sphere { radius: 0.1 },
                    origin: Pose::identity(),
                },
                Primitive {
                    shape: Shape::Sphere { radius: 0.1 },
                    origin: Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)),
                },
            ],
            visual_mesh: None,
        };
        for t in generate_taxel_layout(&link, 300, 2).unwrap() {
            let d = link
                .collision
                .iter()
                .map(|p| p.shape.signed_distance(&p.origin, &t.local_position).0)
                .fold(f64::INFINITY, f64::min);
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn text_format_is_lossless() {
        let taxels = generate_taxel_layout(&capsule_link(), 20, 3).unwrap();
        let back = parse_taxel_layout(&write_taxel_layout(&taxels)).unwrap();
        assert_eq!(back, taxels);
        assert!(parse_taxel_layout("0 arm 0 0 0 0 0 2 0.005\n").is_err());
        assert!(parse_taxel_layout("0 arm 0 0 0\n").is_err());
    }
}
