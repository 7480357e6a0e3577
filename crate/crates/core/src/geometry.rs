//! Analytic collision primitives: bounding boxes, ray casts, signed distances
//! and pairwise contact generation.
//!
//! Capsules are aligned with their local z axis and centred on the origin;
//! boxes are given by half extents.

use nalgebra::Vector3;
use rand::Rng;
use std::f64::consts::PI;

use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Capsule { radius: f64, half_length: f64 },
    Box { half_extents: Vector3<f64> },
}

impl Shape {
    pub fn is_valid(&self) -> bool {
        match *self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Capsule {
                radius,
                half_length,
            } => radius > 0.0 && half_length > 0.0,
            Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
        }
    }

    pub fn aabb(&self, pose: &Pose) -> Aabb {
        match *self {
            Shape::Sphere { radius } => Aabb::around(pose.position, Vector3::repeat(radius)),
            Shape::Capsule {
                radius,
                half_length,
            } => {
                let axis = pose.axis(2) * half_length;
                let ext = axis.abs() + Vector3::repeat(radius);
                Aabb::around(pose.position, ext)
            }
            Shape::Box { half_extents } => {
                let r = pose.rotation_matrix().abs();
                Aabb::around(pose.position, r * half_extents)
            }
        }
    }

    /// Signed distance from a point in the shape's local frame to its surface,
    /// together with the outward unit normal at the closest surface point.
    pub fn signed_distance_local(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        match *self {
            Shape::Sphere { radius } => {
                let n = p.norm();
                let normal = if n > 0.0 { p / n } else { Vector3::z() };
                (n - radius, normal)
            }
            Shape::Capsule {
                radius,
                half_length,
            } => {
                let z = p.z.clamp(-half_length, half_length);
                let d = p - Vector3::new(0.0, 0.0, z);
                let n = d.norm();
                let normal = if n > 0.0 {
                    d / n
                } else if p.z >= 0.0 {
                    Vector3::x()
                } else {
                    -Vector3::x()
                };
                (n - radius, normal)
            }
            Shape::Box { half_extents } => box_sdf(&half_extents, p),
        }
    }

    /// Signed distance to a posed shape, normal expressed in world frame.
    pub fn signed_distance(&self, pose: &Pose, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (d, n) = self.signed_distance_local(&pose.inverse_transform_point(p));
        (d, pose.transform_vector(&n))
    }

    /// Distance along a unit-direction ray (local frame) to the first surface
    /// crossing, within `[0, max_t]`. Origins inside the shape hit at 0.
    pub fn raycast_local(&self, o: &Vector3<f64>, d: &Vector3<f64>, max_t: f64) -> Option<f64> {
        let t = match *self {
            Shape::Sphere { radius } => ray_sphere(o, d, &Vector3::zeros(), radius),
            Shape::Capsule {
                radius,
                half_length,
            } => ray_capsule(o, d, radius, half_length),
            Shape::Box { half_extents } => ray_box(o, d, &half_extents),
        }?;
        (t <= max_t).then_some(t)
    }

    pub fn raycast(
        &self,
        pose: &Pose,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        max_t: f64,
    ) -> Option<f64> {
        let o = pose.inverse_transform_point(origin);
        let d = pose.inverse_transform_vector(dir);
        self.raycast_local(&o, &d, max_t)
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => 4.0 * PI * radius * radius,
            Shape::Capsule {
                radius,
                half_length,
            } => 4.0 * PI * radius * radius + 2.0 * PI * radius * 2.0 * half_length,
            Shape::Box { half_extents: h } => 8.0 * (h.x * h.y + h.y * h.z + h.x * h.z),
        }
    }

    /// Area-uniform sample on the surface: (local point, local outward normal).
    pub fn sample_surface<R: Rng>(&self, rng: &mut R) -> (Vector3<f64>, Vector3<f64>) {
        match *self {
            Shape::Sphere { radius } => {
                let n = uniform_unit(rng);
                (n * radius, n)
            }
            Shape::Capsule {
                radius,
                half_length,
            } => {
                let caps = 4.0 * PI * radius * radius;
                let side = 2.0 * PI * radius * 2.0 * half_length;
                if rng.gen::<f64>() * (caps + side) < side {
                    let phi = rng.gen::<f64>() * 2.0 * PI;
                    let z = (rng.gen::<f64>() * 2.0 - 1.0) * half_length;
                    let n = Vector3::new(phi.cos(), phi.sin(), 0.0);
                    (n * radius + Vector3::new(0.0, 0.0, z), n)
                } else {
                    let n = uniform_unit(rng);
                    let c = if n.z >= 0.0 { half_length } else { -half_length };
                    (n * radius + Vector3::new(0.0, 0.0, c), n)
                }
            }
            Shape::Box { half_extents: h } => {
                let areas = [h.y * h.z, h.x * h.z, h.x * h.y];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let mut p = Vector3::zeros();
                for k in 0..3 {
                    p[k] = (rng.gen::<f64>() * 2.0 - 1.0) * h[k];
                }
                p[axis] = sign * h[axis];
                let mut n = Vector3::zeros();
                n[axis] = sign;
                (p, n)
            }
        }
    }
}

fn uniform_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.gen::<f64>() * 2.0 - 1.0;
    let phi = rng.gen::<f64>() * 2.0 * PI;
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

fn box_sdf(h: &Vector3<f64>, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let q = p.abs() - h;
    if q.iter().any(|&c| c > 0.0) {
        let outside = q.map(|c| c.max(0.0));
        let d = outside.norm();
        let n = Vector3::new(
            outside.x * p.x.signum(),
            outside.y * p.y.signum(),
            outside.z * p.z.signum(),
        ) / d;
        (d, n)
    } else {
        // Inside (or on the surface): nearest face wins.
        let axis = q.imax();
        let mut n = Vector3::zeros();
        n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
        (q[axis], n)
    }
}

fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let m = o - c;
    let cc = m.dot(&m) - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let b = m.dot(d);
    if b > 0.0 {
        return None;
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    Some((-b - disc.sqrt()).max(0.0))
}

fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, h: &Vector3<f64>) -> Option<f64> {
    let mut t0 = 0.0_f64;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if o[k].abs() > h[k] {
                return None;
            }
        } else {
            let inv = 1.0 / d[k];
            let mut a = (-h[k] - o[k]) * inv;
            let mut b = (h[k] - o[k]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some(t0)
}

fn ray_capsule(o: &Vector3<f64>, d: &Vector3<f64>, r: f64, h: f64) -> Option<f64> {
    let z = o.z.clamp(-h, h);
    if (o - Vector3::new(0.0, 0.0, z)).norm_squared() <= r * r {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    // Cylinder side.
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-300 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let t = (-b - disc.sqrt()) / a;
            if t >= 0.0 && (o.z + t * d.z).abs() <= h {
                keep(t);
            }
        }
    }
    for cz in [-h, h] {
        if let Some(t) = ray_sphere(o, d, &Vector3::new(0.0, 0.0, cz), r) {
            keep(t);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn around(center: Vector3<f64>, half: Vector3<f64>) -> Self {
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|k| self.min[k] > self.max[k])
    }

    pub fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb::new(
            self.min - Vector3::repeat(margin),
            self.max + Vector3::repeat(margin),
        )
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }

    /// Bounding box of this box after a rigid transform.
    pub fn transformed(&self, pose: &Pose) -> Aabb {
        let mut out = Aabb::empty();
        for c in self.corners() {
            out.grow(&pose.transform_point(&c));
        }
        out
    }

    /// Slab test: does the segment `origin + t*dir, t in [0, max_t]` touch the box?
    pub fn hit_by_segment(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, max_t: f64) -> bool {
        let mut t0 = 0.0_f64;
        let mut t1 = max_t;
        for k in 0..3 {
            if dir[k].abs() < 1e-300 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return false;
                }
            } else {
                let inv = 1.0 / dir[k];
                let mut a = (self.min[k] - origin[k]) * inv;
                let mut b = (self.max[k] - origin[k]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Contact between two posed shapes. `normal` points from A towards B and
/// `depth` is the penetration (0 when exactly touching).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactGeometry {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub depth: f64,
}

impl ContactGeometry {
    fn flipped(self) -> Self {
        Self {
            normal: -self.normal,
            ..self
        }
    }
}

pub fn contact(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Option<ContactGeometry> {
    use Shape::*;
    match (a, b) {
        (Sphere { radius }, _) => sphere_vs(pa.position, *radius, b, pb),
        (_, Sphere { radius }) => sphere_vs(pb.position, *radius, a, pa).map(|c| c.flipped()),
        (
            Capsule {
                radius: ra,
                half_length: ha,
            },
            Capsule {
                radius: rb,
                half_length: hb,
            },
        ) => {
            let (a0, a1) = segment(pa, *ha);
            let (b0, b1) = segment(pb, *hb);
            let (ca, cb) = closest_segment_points(&a0, &a1, &b0, &b1);
            spheres(ca, *ra, cb, *rb)
        }
        (Capsule { radius, half_length }, Box { .. }) => capsule_vs(pa, *radius, *half_length, b, pb),
        (Box { .. }, Capsule { radius, half_length }) => {
            capsule_vs(pb, *radius, *half_length, a, pa).map(|c| c.flipped())
        }
        (Box { half_extents: ha }, Box { half_extents: hb }) => box_box(ha, pa, hb, pb),
    }
}

fn segment(pose: &Pose, half_length: f64) -> (Vector3<f64>, Vector3<f64>) {
    let axis = pose.axis(2) * half_length;
    (pose.position - axis, pose.position + axis)
}

fn spheres(ca: Vector3<f64>, ra: f64, cb: Vector3<f64>, rb: f64) -> Option<ContactGeometry> {
    let d = cb - ca;
    let dist = d.norm();
    let depth = ra + rb - dist;
    if depth < 0.0 {
        return None;
    }
    let normal = if dist > 0.0 { d / dist } else { Vector3::z() };
    Some(ContactGeometry {
        point: ca + normal * (ra - 0.5 * depth),
        normal,
        depth,
    })
}

/// Sphere (as A) against any shape B.
fn sphere_vs(c: Vector3<f64>, r: f64, b: &Shape, pb: &Pose) -> Option<ContactGeometry> {
    match *b {
        Shape::Sphere { radius } => spheres(c, r, pb.position, radius),
        Shape::Capsule { half_length, radius } => {
            let (s0, s1) = segment(pb, half_length);
            let q = closest_point_on_segment(&c, &s0, &s1);
            spheres(c, r, q, radius)
        }
        Shape::Box { .. } => {
            let (d, n) = b.signed_distance(pb, &c);
            let depth = r - d;
            if depth < 0.0 {
                return None;
            }
            Some(ContactGeometry {
                point: c - n * d,
                normal: -n,
                depth,
            })
        }
    }
}

/// Capsule (as A) against a box B: minimize the box's signed distance along
/// the capsule segment (convex, so a golden-section search suffices).
fn capsule_vs(pa: &Pose, r: f64, h: f64, b: &Shape, pb: &Pose) -> Option<ContactGeometry> {
    let (s0, s1) = segment(pa, h);
    let at = |t: f64| s0 + (s1 - s0) * t;
    let f = |t: f64| b.signed_distance(pb, &at(t)).0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut t = 0.5 * (lo + hi);
    for cand in [0.0, 1.0] {
        if f(cand) < f(t) {
            t = cand;
        }
    }
    sphere_vs(at(t), r, b, pb)
}

fn box_box(ha: &Vector3<f64>, pa: &Pose, hb: &Vector3<f64>, pb: &Pose) -> Option<ContactGeometry> {
    let ra = pa.rotation_matrix();
    let rb = pb.rotation_matrix();
    let d = pb.position - pa.position;
    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(ra.column(i).into_owned());
        axes.push(rb.column(i).into_owned());
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = ra.column(i).cross(&rb.column(j));
            let n = c.norm();
            if n > 1e-9 {
                axes.push(c / n);
            }
        }
    }
    let radius = |r: &nalgebra::Matrix3<f64>, h: &Vector3<f64>, l: &Vector3<f64>| {
        (0..3).map(|k| h[k] * r.column(k).dot(l).abs()).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    let mut best_axis = Vector3::z();
    for l in &axes {
        let overlap = radius(&ra, ha, l) + radius(&rb, hb, l) - d.dot(l).abs();
        if overlap < 0.0 {
            return None;
        }
        if overlap < best {
            best = overlap;
            best_axis = if d.dot(l) < 0.0 { -l } else { *l };
        }
    }
    // Deepest vertex of B along -normal, pulled back to the middle of the overlap.
    let mut support = pb.position;
    for k in 0..3 {
        let col = rb.column(k);
        let s = if col.dot(&best_axis) > 0.0 { -1.0 } else { 1.0 };
        support += col * (s * hb[k]);
    }
    Some(ContactGeometry {
        point: support + best_axis * (0.5 * best),
        normal: best_axis,
        depth: best,
    })
}

pub fn closest_point_on_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest points between segments p1-q1 and p2-q2.
pub fn closest_segment_points(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return (*p1, *p2);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-15 * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}
