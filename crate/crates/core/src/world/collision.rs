use super::{BodyId, Contact, World};
use crate::geometry::contact;

/// All current contacts: robot-object and object-object pairs, plus
/// non-adjacent link pairs when self-collision checking is enabled. Pairs
/// are reported in collider order.
pub fn detect_collisions(world: &World) -> Vec<Contact> {
    let colliders = world.colliders();
    let model = world.model();
    let self_collisions = world.flags().self_collisions;
    let mut out = Vec::new();
    for (i, a) in colliders.iter().enumerate() {
        for b in &colliders[i + 1..] {
            if a.body == b.body || !a.aabb.overlaps(&b.aabb) {
                continue;
            }
            if let (BodyId::Link(la), BodyId::Link(lb)) = (a.body, b.body) {
                if !self_collisions || model.adjacent(la, lb) {
                    continue;
                }
            }
            if let (BodyId::Object(oa), BodyId::Object(ob)) = (a.body, b.body) {
                let (sa, sb) = (&world.objects[oa], &world.objects[ob]);
                if !sa.spec.dynamic && !sb.spec.dynamic {
                    continue;
                }
            }
            if let Some(g) = contact(&a.shape, &a.pose, &b.shape, &b.pose) {
                out.push(Contact {
                    body_a: a.body,
                    body_b: b.body,
                    point: g.point,
                    normal: g.normal,
                    depth: g.depth,
                });
            }
        }
    }
    out
}
