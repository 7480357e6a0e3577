use nalgebra::Vector3;

use crate::skin::{SkinState, TaxelReading};

/// The biggest cluster of active taxels on one skin part.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchEvent {
    pub part: String,
    /// Mean world position of the cluster's taxels.
    pub centroid: Vector3<f64>,
    /// Mean outward normal of the cluster's taxels, normalised.
    pub normal: Vector3<f64>,
    pub taxel_count: usize,
    pub mean_activation: f64,
    pub taxel_ids: Vec<u32>,
}

fn event(part: &str, members: &[(u32, &TaxelReading)]) -> TouchEvent {
    let n = members.len() as f64;
    let centroid = members.iter().map(|(_, r)| r.position).sum::<Vector3<f64>>() / n;
    let normal = members.iter().map(|(_, r)| r.normal).sum::<Vector3<f64>>();
    TouchEvent {
        part: part.to_string(),
        centroid,
        normal: normal.try_normalize(1e-12).unwrap_or(members[0].1.normal),
        taxel_count: members.len(),
        mean_activation: members.iter().map(|(_, r)| r.activation as f64).sum::<f64>() / n,
        taxel_ids: members.iter().map(|(id, _)| *id).collect(),
    }
}

/// One event per active part: single-linkage clustering with distance
/// threshold `link_threshold`, keeping the biggest cluster (ties: higher mean
/// activation, then lower minimum taxel id).
pub fn cluster_touches(state: &SkinState, link_threshold: f64) -> Vec<TouchEvent> {
    let mut out = Vec::new();
    for (part, readings) in &state.parts {
        let items: Vec<(u32, &TaxelReading)> = readings.iter().map(|(id, r)| (*id, r)).collect();
        let mut assigned = vec![false; items.len()];
        let mut best: Option<TouchEvent> = None;
        for seed in 0..items.len() {
            if assigned[seed] {
                continue;
            }
            assigned[seed] = true;
            let mut members = vec![seed];
            let mut k = 0;
            while k < members.len() {
                let p = items[members[k]].1.position;
                for j in 0..items.len() {
                    if !assigned[j] && (items[j].1.position - p).norm() <= link_threshold {
                        assigned[j] = true;
                        members.push(j);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            let cluster: Vec<_> = members.iter().map(|&m| items[m]).collect();
            let e = event(part, &cluster);
            // Seeds are visited in id order, so earlier clusters have lower minimum ids.
            let better = best.as_ref().is_none_or(|b| {
                e.taxel_count > b.taxel_count || (e.taxel_count == b.taxel_count && e.mean_activation > b.mean_activation)
            });
            if better {
                best = Some(e);
            }
        }
        out.extend(best);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn reading(x: f64, a: u8) -> TaxelReading {
        TaxelReading {
            activation: a,
            position: Vector3::new(x, 0.0, 0.0),
            normal: Vector3::z(),
        }
    }

    #[test]
    fn empty_state() {
        assert!(cluster_touches(&SkinState::default(), 0.02).is_empty());
    }

    #[test]
    fn single_taxel() {
        let mut s = SkinState::default();
        s.parts.insert("arm".into(), BTreeMap::from([(4, reading(0.3, 99))]));
        let e = cluster_touches(&s, 0.02);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].centroid, Vector3::new(0.3, 0.0, 0.0));
        assert_eq!(e[0].normal, Vector3::z());
        assert_eq!(e[0].taxel_count, 1);
    }

    #[test]
    fn biggest_group_wins() {
        let mut m = BTreeMap::new();
        for i in 0..3 {
            m.insert(i, reading(0.005 * i as f64, 200));
        }
        for i in 0..5 {
            m.insert(10 + i, reading(0.1 + 0.005 * i as f64, 50));
        }
        let mut s = SkinState::default();
        s.parts.insert("arm".into(), m);
        let e = cluster_touches(&s, 0.02);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].taxel_count, 5);
        assert_eq!(e[0].taxel_ids, vec![10, 11, 12, 13, 14]);
    }

    #[test]
    fn ties_prefer_activation_then_id() {
        let mut s = SkinState::default();
        s.parts.insert(
            "arm".into(),
            BTreeMap::from([(1, reading(0.0, 10)), (2, reading(0.5, 20)), (3, reading(1.0, 20))]),
        );
        let e = cluster_touches(&s, 0.02);
        assert_eq!(e[0].taxel_ids, vec![2]);
    }
}
