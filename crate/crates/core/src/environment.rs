//! Simulated world: BS deployment, UE trajectories, and per-link LoS/NLoS
//! blockage states.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point in the zone plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned zone rectangle anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub position: Point,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub extent: Extent,
    /// BS per square meter.
    pub density: f64,
    pub base_stations: Vec<BaseStation>,
}

impl Zone {
    pub fn len(&self) -> usize {
        self.base_stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_stations.is_empty()
    }
}

/// Antenna heights used for 3D distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heights {
    pub bs: f64,
    pub ue: f64,
}

impl Default for Heights {
    fn default() -> Self {
        Heights { bs: 6.0, ue: 1.5 }
    }
}

/// Drop BSs as a homogeneous PPP over `extent`, conditioned on at least one
/// BS (a zero count is redrawn).
pub fn deploy_bs<R: Rng + ?Sized>(
    extent: Extent,
    density: f64,
    bs_height: f64,
    rng: &mut R,
) -> Result<Zone> {
    if !(density > 0.0) || !density.is_finite() {
        return invalid(format!("BS density must be positive, got {density}"));
    }
    if !(extent.width > 0.0 && extent.height > 0.0) {
        return invalid("zone extent must have positive area");
    }
    let mean = density * extent.area();
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let count = loop {
        let n = poisson.sample(rng) as usize;
        if n > 0 {
            break n;
        }
    };
    let base_stations = (0..count)
        .map(|id| BaseStation {
            id,
            position: Point::new(
                rng.random::<f64>() * extent.width,
                rng.random::<f64>() * extent.height,
            ),
            height: bs_height,
        })
        .collect();
    Ok(Zone { extent, density, base_stations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mobility {
    Pedestrian,
    Vehicular,
}

impl Mobility {
    pub fn default_speed_kmh(self) -> f64 {
        match self {
            Mobility::Pedestrian => 5.0,
            Mobility::Vehicular => 36.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point>,
    pub spacing: f64,
    pub mobility: Mobility,
    pub speed_kmh: f64,
}

impl Trajectory {
    /// Number of location indexes, M.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arclength from the first point to location `i`.
    pub fn arclength(&self, i: usize) -> f64 {
        self.spacing * i as f64
    }
}

/// Resample a waypoint polyline at fixed arclength `spacing`.
///
/// Returns `floor(length / spacing) + 1` points; the first is the first
/// waypoint.
pub fn build_trajectory(
    waypoints: &[Point],
    spacing: f64,
    mobility: Mobility,
    speed_kmh: f64,
) -> Result<Trajectory> {
    if !(spacing > 0.0) {
        return invalid(format!("trajectory spacing must be positive, got {spacing}"));
    }
    if waypoints.len() < 2 {
        return invalid("a trajectory needs at least two waypoints");
    }
    let seg_len: Vec<f64> = waypoints.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = seg_len.iter().sum();
    // Tolerate round-off so a 100 m path sampled every 2 m keeps its endpoint.
    let count = ((total / spacing) + 1e-9).floor() as usize + 1;
    if count < 2 {
        return invalid(format!(
            "path length {total} m is shorter than the spacing {spacing} m"
        ));
    }

    let mut points = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..count {
        let s = spacing * k as f64;
        while seg + 1 < seg_len.len() && s > seg_start + seg_len[seg] {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let (a, b) = (waypoints[seg], waypoints[seg + 1]);
        let t = if seg_len[seg] > 0.0 {
            ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        points.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
    }
    Ok(Trajectory { points, spacing, mobility, speed_kmh })
}

/// LoS probability for a 3D link distance `d` (meters), NYC 28 GHz fit.
pub fn los_probability(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive, got {d}")));
    }
    let e = (-d / 71.0).exp();
    let bracket = (27.0 / d).min(1.0) * (1.0 - e) + e;
    Ok(bracket * bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkCondition {
    Los,
    Nlos,
}

impl LinkCondition {
    pub fn is_los(self) -> bool {
        self == LinkCondition::Los
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub bs_id: usize,
    pub location_index: usize,
    pub condition: LinkCondition,
    pub distance_3d: f64,
}

pub fn distance_3d(bs: &BaseStation, ue: &Point, ue_height: f64) -> f64 {
    let horizontal = bs.position.distance(ue);
    horizontal.hypot(bs.height - ue_height)
}

/// How blockage draws relate along the trajectory.
///
/// With `decorrelation_m == 0` every (BS, location) draw is independent.
/// Otherwise the draws for one BS come from a Gaussian copula whose latent
/// correlation between locations `Δs` apart is `exp(-Δs / decorrelation_m)`;
/// each marginal stays Bernoulli(p_LoS(d)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageModel {
    pub decorrelation_m: f64,
}

impl Default for BlockageModel {
    fn default() -> Self {
        BlockageModel { decorrelation_m: 0.0 }
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Draw one episode's LoS/NLoS table, indexed `[bs][location]`.
pub fn draw_link_states<R: Rng + ?Sized>(
    zone: &Zone,
    trajectory: &Trajectory,
    ue_height: f64,
    model: BlockageModel,
    rng: &mut R,
) -> Vec<Vec<LinkState>> {
    zone.base_stations
        .iter()
        .map(|bs| draw_bs_link_states(bs, trajectory, ue_height, model, rng))
        .collect()
}

/// LoS/NLoS states of one BS along the trajectory.
pub fn draw_bs_link_states<R: Rng + ?Sized>(
    bs: &BaseStation,
    trajectory: &Trajectory,
    ue_height: f64,
    model: BlockageModel,
    rng: &mut R,
) -> Vec<LinkState> {
    let rho = if model.decorrelation_m > 0.0 {
        (-trajectory.spacing / model.decorrelation_m).exp()
    } else {
        0.0
    };
    let mut latent: f64 = 0.0;
    trajectory
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = distance_3d(bs, p, ue_height);
            let p_los = los_probability(d).unwrap_or(1.0);
            let u = if rho > 0.0 {
                let eps: f64 = StandardNormal.sample(rng);
                latent = if i == 0 { eps } else { rho * latent + (1.0 - rho * rho).sqrt() * eps };
                standard_normal_cdf(latent)
            } else {
                rng.random::<f64>()
            };
            LinkState {
                bs_id: bs.id,
                location_index: i,
                condition: if u < p_los { LinkCondition::Los } else { LinkCondition::Nlos },
                distance_3d: d,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn straight(len: f64, spacing: f64) -> Trajectory {
        build_trajectory(
            &[Point::new(0.0, 50.0), Point::new(len, 50.0)],
            spacing,
            Mobility::Pedestrian,
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn trajectory_point_counts() {
        assert_eq!(straight(100.0, 2.0).len(), 51);
        assert_eq!(straight(100.0, 10.0).len(), 11);
        assert_eq!(straight(2.0, 2.0).len(), 2);
    }

    #[test]
    fn trajectory_rejects_bad_spacing() {
        let w = [Point::new(0.0, 0.0), Point::new(10.0, 0.0)];
        assert!(build_trajectory(&w, 0.0, Mobility::Pedestrian, 5.0).is_err());
        assert!(build_trajectory(&w, -1.0, Mobility::Pedestrian, 5.0).is_err());
        assert!(build_trajectory(&w, 11.0, Mobility::Pedestrian, 5.0).is_err());
    }

    #[test]
    fn polyline_points_are_spaced_by_arclength() {
        let w = [Point::new(0.0, 0.0), Point::new(5.0, 0.0), Point::new(5.0, 7.0)];
        let t = build_trajectory(&w, 1.0, Mobility::Vehicular, 36.0).unwrap();
        assert_eq!(t.len(), 13);
        assert_eq!(t.points[5], Point::new(5.0, 0.0));
        assert!((t.points[8].y - 3.0).abs() < 1e-12);
        assert_eq!(*t.points.last().unwrap(), Point::new(5.0, 7.0));
    }

    #[test]
    fn deploy_rejects_bad_input() {
        let mut rng = stream(1, &[]);
        let ext = Extent { width: 100.0, height: 100.0 };
        assert!(deploy_bs(ext, 0.0, 6.0, &mut rng).is_err());
        assert!(deploy_bs(ext, -1e-3, 6.0, &mut rng).is_err());
        assert!(deploy_bs(Extent { width: 0.0, height: 5.0 }, 1e-3, 6.0, &mut rng).is_err());
    }

    #[test]
    fn deploy_is_seeded_and_inside_extent() {
        let ext = Extent { width: 100.0, height: 100.0 };
        let a = deploy_bs(ext, 5e-4, 6.0, &mut stream(3, &[1])).unwrap();
        let b = deploy_bs(ext, 5e-4, 6.0, &mut stream(3, &[1])).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(a.base_stations.iter().all(|bs| ext.contains(&bs.position)));
    }

    #[test]
    fn deploy_mean_count_tracks_density() {
        let ext = Extent { width: 100.0, height: 100.0 };
        for (density, mean) in [(5e-4f64, 5.0f64), (1e-3, 10.0)] {
            let mut rng = stream(11, &[density.to_bits()]);
            let n = 4000;
            let total: usize = (0..n)
                .map(|_| deploy_bs(ext, density, 6.0, &mut rng).unwrap().len())
                .sum();
            let got = total as f64 / n as f64;
            // Zero-truncation lifts the mean by mean·e^-mean/(1-e^-mean), < 0.04 here.
            let truncated = mean / (1.0 - (-mean).exp());
            let se = (mean / n as f64).sqrt();
            assert!((got - truncated).abs() < 4.0 * se, "density {density}: {got} vs {truncated}");
        }
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(10.0).unwrap(), 1.0);
        assert_eq!(los_probability(27.0).unwrap(), 1.0);
        assert!(los_probability(0.0).is_err());
        assert!(los_probability(-3.0).is_err());
        // independent evaluation at d = 71: (27/71·(1-e^-1) + e^-1)^2
        let e1 = (-1.0f64).exp();
        let expect = (27.0 / 71.0 * (1.0 - e1) + e1).powi(2);
        assert!((los_probability(71.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.3700).abs() < 5e-4);
    }

    #[test]
    fn los_probability_monotone_beyond_27() {
        let mut prev = 1.0;
        for d in 27..=500 {
            let p = los_probability(d as f64).unwrap();
            assert!(p <= prev, "increase at {d}");
            assert!((p + (1.0 - p) - 1.0).abs() < 1e-15);
            prev = p;
        }
        for d in 1..=27 {
            assert_eq!(los_probability(d as f64).unwrap(), 1.0);
        }
        assert!(los_probability(1e6).unwrap() < 1e-6);
    }

    fn zone_at(points: &[Point]) -> Zone {
        Zone {
            extent: Extent { width: 100.0, height: 100.0 },
            density: 1e-3,
            base_stations: points
                .iter()
                .enumerate()
                .map(|(id, &position)| BaseStation { id, position, height: 6.0 })
                .collect(),
        }
    }

    #[test]
    fn short_links_are_always_los() {
        let zone = zone_at(&[Point::new(10.0, 52.0)]);
        let traj = straight(20.0, 2.0);
        let table = draw_link_states(&zone, &traj, 1.5, BlockageModel::default(), &mut stream(5, &[]));
        assert!(table[0].iter().all(|l| l.condition.is_los()));
    }

    #[test]
    fn far_links_are_almost_always_nlos() {
        let zone = zone_at(&[Point::new(1e5, 0.0)]);
        let traj = straight(20.0, 2.0);
        let table = draw_link_states(&zone, &traj, 1.5, BlockageModel::default(), &mut stream(5, &[]));
        assert!(table[0].iter().all(|l| !l.condition.is_los()));
    }

    #[test]
    fn empirical_los_fraction_matches_probability() {
        // One BS placed so that the 3D distance to a single-point trajectory is 71 m.
        let horizontal = (71.0f64.powi(2) - 4.5f64.powi(2)).sqrt();
        let zone = zone_at(&[Point::new(horizontal, 0.0)]);
        let traj = Trajectory {
            points: vec![Point::new(0.0, 0.0)],
            spacing: 2.0,
            mobility: Mobility::Pedestrian,
            speed_kmh: 5.0,
        };
        for model in [BlockageModel::default(), BlockageModel { decorrelation_m: 20.0 }] {
            let mut rng = stream(9, &[model.decorrelation_m.to_bits()]);
            let n = 100_000;
            let los = (0..n)
                .filter(|_| draw_link_states(&zone, &traj, 1.5, model, &mut rng)[0][0].condition.is_los())
                .count();
            let frac = los as f64 / n as f64;
            assert!((frac - 0.370).abs() < 0.01, "{frac}");
        }
    }

    #[test]
    fn correlated_blockage_keeps_marginals() {
        let zone = zone_at(&[Point::new(50.0, 110.0)]);
        let traj = straight(100.0, 2.0);
        let model = BlockageModel { decorrelation_m: 10.0 };
        let mut rng = stream(13, &[]);
        let reps = 20_000;
        let mut counts = vec![0usize; traj.len()];
        let mut flips = 0usize;
        for _ in 0..reps {
            let t = draw_link_states(&zone, &traj, 1.5, model, &mut rng);
            for (i, l) in t[0].iter().enumerate() {
                counts[i] += l.condition.is_los() as usize;
            }
            flips += t[0].windows(2).filter(|w| w[0].condition != w[1].condition).count();
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = los_probability(traj_distance(&zone, &traj, i)).unwrap();
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((c as f64 / reps as f64 - p).abs() < 5.0 * se + 1e-3, "location {i}");
        }
        // Correlated draws flip far less often than independent ones would.
        let independent: f64 = (1..traj.len())
            .map(|i| {
                let (a, b) = (
                    los_probability(traj_distance(&zone, &traj, i - 1)).unwrap(),
                    los_probability(traj_distance(&zone, &traj, i)).unwrap(),
                );
                a * (1.0 - b) + b * (1.0 - a)
            })
            .sum();
        assert!((flips as f64 / reps as f64) < 0.6 * independent);
    }

    fn traj_distance(zone: &Zone, traj: &Trajectory, i: usize) -> f64 {
        distance_3d(&zone.base_stations[0], &traj.points[i], 1.5)
    }

    #[test]
    fn link_draws_are_deterministic() {
        let zone = zone_at(&[Point::new(30.0, 80.0), Point::new(70.0, 10.0)]);
        let traj = straight(100.0, 2.0);
        let a = draw_link_states(&zone, &traj, 1.5, BlockageModel::default(), &mut stream(2, &[4]));
        let b = draw_link_states(&zone, &traj, 1.5, BlockageModel::default(), &mut stream(2, &[4]));
        assert_eq!(a, b);
    }
}
