use serde::{Deserialize, Serialize};

use super::{PathSkeleton, SkeletonPath};
use crate::channel::{wrap_angle, Angles};

/// Scaling of the gain coordinate relative to the angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    /// Feature units per dB of gain.
    pub gain_per_db: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights { gain_per_db: 0.1 }
    }
}

fn angle_diff(a: &Angles, b: &Angles) -> [f64; 2] {
    [wrap_angle(a.azimuth - b.azimuth), a.elevation - b.elevation]
}

/// Path gains in dB relative to the strongest path of the skeleton.
fn relative_db(s: &PathSkeleton) -> Vec<f64> {
    let db: Vec<f64> = s.paths.iter().map(SkeletonPath::gain_db).collect();
    let top = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    db.iter().map(|g| g - top).collect()
}

fn sq_diff(a: &SkeletonPath, ga: f64, b: &SkeletonPath, gb: f64, w: DistanceWeights) -> f64 {
    let [d0, d1] = angle_diff(&a.aod, &b.aod);
    let [d2, d3] = angle_diff(&a.aoa, &b.aoa);
    let d4 = w.gain_per_db * (ga - gb);
    d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4
}

/// Distance between two skeletons.
///
/// Features are `(AoD, AoA, weighted gain)`, with azimuths compared modulo
/// 2π and gains in dB relative to each skeleton's strongest path, so a
/// common change of pathloss moves nothing. Paths are paired greedily,
/// globally closest AoD first; a path left without a partner is compared
/// with its nearest path on the other side. The result is the Euclidean norm
/// of all differences. An empty skeleton is infinitely far from a non-empty
/// one.
pub fn skeleton_distance(a: &PathSkeleton, b: &PathSkeleton, w: DistanceWeights) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let (ga, gb) = (relative_db(a), relative_db(b));
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, pa) in a.paths.iter().enumerate() {
        for (j, pb) in b.paths.iter().enumerate() {
            let [x, y] = angle_diff(&pa.aod, &pb.aod);
            pairs.push((x.hypot(y), sq_diff(pa, ga[i], pb, gb[j], w), i, j));
        }
    }
    // Order by AoD gap, then by full gap, so swapping a and b picks the same pairs.
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut nearest_a = vec![f64::INFINITY; a.len()];
    let mut nearest_b = vec![f64::INFINITY; b.len()];
    let mut total = 0.0;
    for &(_, sq, i, j) in &pairs {
        nearest_a[i] = nearest_a[i].min(sq);
        nearest_b[j] = nearest_b[j].min(sq);
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += sq;
        }
    }
    for (near, used) in nearest_a.iter().zip(&used_a).chain(nearest_b.iter().zip(&used_b)) {
        if !used {
            total += near;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(az_bs: f64, el_bs: f64, az_ue: f64, el_ue: f64, gain: f64) -> SkeletonPath {
        SkeletonPath { aod: Angles::new(az_bs, el_bs), aoa: Angles::new(az_ue, el_ue), gain }
    }

    fn sk(paths: Vec<SkeletonPath>) -> PathSkeleton {
        PathSkeleton { bs_id: 0, grid_id: 0, paths }
    }

    #[test]
    fn single_coordinate() {
        let a = sk(vec![path(0.3, 0.1, -0.2, 0.0, 1e-5)]);
        let b = sk(vec![path(0.4, 0.1, -0.2, 0.0, 2e-5)]);
        let d = skeleton_distance(&a, &b, DistanceWeights { gain_per_db: 0.0 });
        assert!((d - 0.1).abs() < 1e-12);
        assert_eq!(skeleton_distance(&a, &a, DistanceWeights::default()), 0.0);
    }

    #[test]
    fn empty_and_unmatched() {
        let e = sk(vec![]);
        let w = DistanceWeights::default();
        assert_eq!(skeleton_distance(&e, &e, w), 0.0);
        let p = path(0.3, 0.4, 0.0, 0.0, 1.0);
        assert_eq!(skeleton_distance(&sk(vec![p]), &e, w), f64::INFINITY);
        // Extra path 0.2 rad of AoD away and 20 dB below: its nearest partner
        // is p, so it costs hypot(0.2, 0.1 * 20).
        let q = path(0.5, 0.4, 0.0, 0.0, 0.1);
        let d = skeleton_distance(&sk(vec![p]), &sk(vec![p, q]), w);
        assert!((d - 0.2f64.hypot(2.0)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn common_gain_change_is_invisible() {
        let p = path(0.1, 0.0, 0.2, 0.0, 1e-4);
        let q = path(-1.0, 0.2, 0.5, 0.1, 1e-5);
        let scaled = |s: &SkeletonPath| SkeletonPath { gain: s.gain * 0.03, ..*s };
        let d = skeleton_distance(&sk(vec![p, q]), &sk(vec![scaled(&p), scaled(&q)]), DistanceWeights::default());
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn azimuth_wraps() {
        let a = sk(vec![path(3.1, 0.0, 0.0, 0.0, 1.0)]);
        let b = sk(vec![path(-3.1, 0.0, 0.0, 0.0, 1.0)]);
        let d = skeleton_distance(&a, &b, DistanceWeights::default());
        assert!((d - (2.0 * std::f64::consts::PI - 6.2)).abs() < 1e-12);
    }

    #[test]
    fn matching_ignores_order() {
        let p = path(0.1, 0.0, 0.2, 0.0, 1e-4);
        let q = path(-1.0, 0.2, 0.5, 0.1, 1e-5);
        let w = DistanceWeights::default();
        assert!(skeleton_distance(&sk(vec![p, q]), &sk(vec![q, p]), w) < 1e-12);
    }

    fn arb_path() -> impl Strategy<Value = SkeletonPath> {
        (-3.0..3.0f64, -1.0..1.0f64, -3.0..3.0f64, -1.0..1.0f64, 1e-7..1e-3f64)
            .prop_map(|(a, b, c, d, g)| path(a, b, c, d, g))
    }

    proptest! {
        #[test]
        fn pseudometric(a in prop::collection::vec(arb_path(), 0..5), b in prop::collection::vec(arb_path(), 0..5)) {
            let w = DistanceWeights::default();
            let (a, b) = (sk(a), sk(b));
            let ab = skeleton_distance(&a, &b, w);
            prop_assert!(ab >= 0.0);
            let ba = skeleton_distance(&b, &a, w);
            prop_assert!(ab == ba || (ab - ba).abs() <= 1e-9 * (1.0 + ab));
            prop_assert_eq!(ab.is_infinite(), a.is_empty() != b.is_empty());
            prop_assert!(skeleton_distance(&a, &a, w).abs() < 1e-12);
        }
    }
}
