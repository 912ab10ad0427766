use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::config::SimConfig;
use super::trace::TraceSet;
use crate::channel::{complex_normal, mean_pathloss_db, power_weights, Angles, PathCluster, RadioConfig, Subpath};
use crate::environment::{
    build_trajectory, deploy_bs, draw_bs_link_states, BaseStation, BlockageModel, Heights, LinkState, Point,
    Trajectory, Zone,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, tag};
use crate::skeleton::{Codebook, PathSkeleton, SkeletonPath, SparseChannel};

/// A scattering point shared by every episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub position: Point,
    pub height: f64,
}

/// Synthetic geometry: BSs and, per BS, the scatterers its NLoS clusters
/// bounce off.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub zone: Zone,
    pub heights: Heights,
    pub reflectors: Vec<Vec<Reflector>>,
    pub blockage: BlockageModel,
    pub shadowing_decorrelation_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic(Geometry),
    Trace(TraceSet),
}

/// Channel of one (BS, location) pair in one episode.
#[derive(Debug, Clone)]
pub struct LinkSample {
    pub los: bool,
    pub channel: SparseChannel,
    /// Ground-truth skeleton, strongest path first.
    pub skeleton: PathSkeleton,
}

/// Everything fixed across episodes of one seed.
#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub trajectory: Trajectory,
    pub radio: RadioConfig,
    pub f_book: Codebook,
    pub w_book: Codebook,
    pub max_paths: usize,
    pub source: Source,
}

fn draw_reflectors<R: Rng + ?Sized>(zone: &Zone, mean: f64, max_height: f64, rng: &mut R) -> Result<Vec<Vec<Reflector>>> {
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(zone
        .base_stations
        .iter()
        .map(|_| {
            let k = (poisson.sample(rng) as usize).max(1);
            (0..k)
                .map(|_| Reflector {
                    position: Point::new(rng.random::<f64>() * zone.extent.width, rng.random::<f64>() * zone.extent.height),
                    height: rng.random::<f64>() * max_height,
                })
                .collect()
        })
        .collect())
}

impl World {
    pub fn build(cfg: &SimConfig) -> Result<World> {
        cfg.validate()?;
        let seed = cfg.experiment.seed;
        let s = &cfg.scenario;
        let speed = s.speed_kmh.unwrap_or(s.mobility.default_speed_kmh());
        let trajectory = build_trajectory(&s.waypoint_points(), s.spacing_m, s.mobility, speed)?;
        let (f_book, w_book) = Codebook::for_arrays(&cfg.arrays, cfg.world.oversampling)?;
        let source = match &cfg.world.trace {
            Some(path) => {
                let t = TraceSet::load(path)?;
                if t.n_locations != trajectory.len() {
                    return invalid(format!(
                        "trace has {} locations but the trajectory has {}",
                        t.n_locations,
                        trajectory.len()
                    ));
                }
                Source::Trace(t)
            }
            None => {
                let heights = s.heights();
                let zone = if s.base_stations.is_empty() {
                    deploy_bs(s.extent(), s.density, heights.bs, &mut stream(seed, &[tag::DEPLOY]))?
                } else {
                    Zone {
                        extent: s.extent(),
                        density: s.base_stations.len() as f64 / s.extent().area(),
                        base_stations: s
                            .base_stations
                            .iter()
                            .enumerate()
                            .map(|(id, p)| BaseStation { id, position: Point::new(p[0], p[1]), height: heights.bs })
                            .collect(),
                    }
                };
                let reflectors = draw_reflectors(
                    &zone,
                    cfg.radio.mean_clusters,
                    cfg.world.reflector_max_height_m,
                    &mut stream(seed, &[tag::REFLECTORS]),
                )?;
                Source::Synthetic(Geometry {
                    zone,
                    heights,
                    reflectors,
                    blockage: cfg.world.blockage(),
                    shadowing_decorrelation_m: cfg.world.shadowing_decorrelation_m,
                })
            }
        };
        Ok(World { seed, trajectory, radio: cfg.radio.clone(), f_book, w_book, max_paths: cfg.world.max_paths, source })
    }

    pub fn n_bs(&self) -> usize {
        match &self.source {
            Source::Synthetic(g) => g.zone.len(),
            Source::Trace(t) => t.n_bs,
        }
    }

    pub fn n_locations(&self) -> usize {
        self.trajectory.len()
    }

    /// Episode `index` of the stream family `phase` (training, tuning, or
    /// evaluation). Equal arguments give identical channels.
    pub fn episode(&self, phase: u64, index: u64) -> Episode<'_> {
        let n = self.n_bs();
        Episode {
            world: self,
            phase,
            index,
            large: (0..n).map(|_| None).collect(),
            links: (0..n * self.n_locations()).map(|_| None).collect(),
        }
    }

    /// Serving BS at the start of an episode: the nearest BS, or for traces
    /// the one with the strongest path at the first location.
    pub fn initial_serving(&self, ep: &Episode<'_>) -> usize {
        match &self.source {
            Source::Synthetic(g) => {
                let start = self.trajectory.points[0];
                let mut best = 0;
                for (j, bs) in g.zone.base_stations.iter().enumerate() {
                    if bs.position.distance(&start) < g.zone.base_stations[best].position.distance(&start) {
                        best = j;
                    }
                }
                best
            }
            Source::Trace(t) => {
                let r = ep.realization();
                let strongest =
                    |j: usize| t.link(r, j, 0).iter().map(|p| p.gain_db).fold(f64::NEG_INFINITY, f64::max);
                let mut best = 0;
                for j in 1..t.n_bs {
                    if strongest(j) > strongest(best) {
                        best = j;
                    }
                }
                best
            }
        }
    }
}

/// Per-BS quantities that stay fixed along one episode's trajectory.
#[derive(Debug, Clone)]
struct LargeScale {
    states: Vec<LinkState>,
    shadow: Vec<f64>,
    /// Cluster weights; entry 0 is the direct path, then one per reflector.
    weights: Vec<f64>,
    /// Subpath angle offsets `[Δaz_bs, Δel_bs, Δaz_ue, Δel_ue]`, row per cluster.
    offsets: Vec<[f64; 4]>,
}

/// One episode's channels, generated on first use.
pub struct Episode<'w> {
    world: &'w World,
    phase: u64,
    index: u64,
    large: Vec<Option<LargeScale>>,
    links: Vec<Option<LinkSample>>,
}

impl<'w> Episode<'w> {
    pub fn world(&self) -> &'w World {
        self.world
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    fn realization(&self) -> usize {
        match &self.world.source {
            Source::Trace(t) => (self.index % t.realizations as u64) as usize,
            Source::Synthetic(_) => 0,
        }
    }

    fn trace_sample(&self, t: &TraceSet, j: usize, i: usize) -> LinkSample {
        let rows = t.link(self.realization(), j, i);
        let clusters: Vec<PathCluster> = rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let aod = Angles::new(r.theta_bs, r.phi_bs);
                let aoa = Angles::new(r.theta_ue, r.phi_ue);
                let gain = Complex64::new(10f64.powf(r.gain_db / 20.0), 0.0);
                PathCluster { index: k, center_aod: aod, center_aoa: aoa, los: r.los != 0, subpaths: vec![Subpath { gain, aod, aoa }] }
            })
            .collect();
        let mut paths: Vec<SkeletonPath> =
            clusters.iter().map(|c| SkeletonPath { aod: c.center_aod, aoa: c.center_aoa, gain: c.dominant_gain() }).collect();
        paths.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        paths.truncate(self.world.max_paths);
        LinkSample {
            los: rows.iter().any(|r| r.los != 0),
            channel: SparseChannel::from_clusters(&clusters),
            skeleton: PathSkeleton { bs_id: j, grid_id: 0, paths },
        }
    }

    /// Channel of BS `j` at location `i`.
    pub fn link(&mut self, j: usize, i: usize) -> &LinkSample {
        let m = self.world.n_locations();
        let slot = j * m + i;
        if self.links[slot].is_none() {
            let world = self.world;
            let sample = match &world.source {
                Source::Synthetic(g) => {
                    let key = [self.phase, self.index, tag::BLOCKAGE, j as u64];
                    let ls = self.large[j].get_or_insert_with(|| large_scale(world, g, &key, j));
                    synthesize(world, g, ls, &[self.phase, self.index, tag::FADING, j as u64, i as u64], j, i)
                }
                Source::Trace(t) => self.trace_sample(t, j, i),
            };
            self.links[slot] = Some(sample);
        }
        self.links[slot].as_ref().expect("just filled")
    }
}

fn large_scale(world: &World, g: &Geometry, key: &[u64], j: usize) -> LargeScale {
    let cfg = &world.radio;
    let bs = &g.zone.base_stations[j];
    let mut rng = stream(world.seed, key);
    let states = draw_bs_link_states(bs, &world.trajectory, g.heights.ue, g.blockage, &mut rng);
    let rho = if g.shadowing_decorrelation_m > 0.0 {
        (-world.trajectory.spacing / g.shadowing_decorrelation_m).exp()
    } else {
        0.0
    };
    let mut z = 0.0;
    let shadow = (0..world.trajectory.len())
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            z = if i == 0 { e } else { rho * z + (1.0 - rho * rho).sqrt() * e };
            z
        })
        .collect();
    let k = g.reflectors[j].len() + 1;
    let weights = power_weights(k, cfg, &mut rng);
    let spread = cfg.subpath_spread_deg.to_radians();
    let offsets = (0..k * cfg.subpaths_per_cluster)
        .map(|_| {
            let mut o = [0.0; 4];
            for x in o.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *x = spread * n;
            }
            o
        })
        .collect();
    LargeScale { states, shadow, weights, offsets }
}

fn synthesize(world: &World, g: &Geometry, ls: &LargeScale, fading_key: &[u64], j: usize, i: usize) -> LinkSample {
    let cfg = &world.radio;
    let state = ls.states[i];
    let los = state.condition.is_los();
    let d = state.distance_3d.max(cfg.reference_distance_m);
    let pl = mean_pathloss_db(d, state.condition, cfg) + cfg.shadowing_db(state.condition) * ls.shadow[i];
    let power = 10f64.powf(-pl / 10.0);

    let bs = &g.zone.base_stations[j];
    let ue = world.trajectory.points[i];
    let hu = g.heights.ue;
    let mut active: Vec<(usize, Angles, Angles)> = Vec::with_capacity(ls.weights.len());
    if los {
        active.push((0, Angles::toward(&bs.position, bs.height, &ue, hu), Angles::toward(&ue, hu, &bs.position, bs.height)));
    }
    for (k, r) in g.reflectors[j].iter().enumerate() {
        active.push((k + 1, Angles::toward(&bs.position, bs.height, &r.position, r.height), Angles::toward(&ue, hu, &r.position, r.height)));
    }
    let mut w: Vec<f64> = active.iter().map(|(k, _, _)| ls.weights[*k]).collect();
    if los {
        // The direct path carries the largest share.
        let imax = (0..w.len()).fold(0, |b, x| if w[x] > w[b] { x } else { b });
        w.swap(0, imax);
    }
    let total: f64 = w.iter().sum();

    let r_count = cfg.subpaths_per_cluster;
    let mut rng = stream(world.seed, fading_key);
    let mut clusters = Vec::with_capacity(active.len());
    let mut paths = Vec::with_capacity(active.len());
    for (slot, &(k, aod, aoa)) in active.iter().enumerate() {
        let amp = (w[slot] / total * power).sqrt();
        let subpaths = (0..r_count)
            .map(|r| {
                let o = ls.offsets[k * r_count + r];
                Subpath {
                    gain: complex_normal(&mut rng) * amp,
                    aod: Angles::new(aod.azimuth + o[0], aod.elevation + o[1]).normalized(),
                    aoa: Angles::new(aoa.azimuth + o[2], aoa.elevation + o[3]).normalized(),
                }
            })
            .collect();
        clusters.push(PathCluster { index: slot, center_aod: aod, center_aoa: aoa, los: k == 0, subpaths });
        paths.push(SkeletonPath { aod, aoa, gain: amp });
    }
    paths.sort_by(|a, b| b.gain.total_cmp(&a.gain));
    paths.truncate(world.max_paths);
    LinkSample {
        los,
        channel: SparseChannel::from_clusters(&clusters),
        skeleton: PathSkeleton { bs_id: j, grid_id: 0, paths },
    }
}
