//! Narrowband cluster channel, planar-array responses, pathloss, SNR, rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environment::{BaseStation, LinkCondition, LinkState, Point};
use crate::error::{invalid, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Angles { azimuth, elevation }
    }

    /// Direction from `from` (at height `from_h`) toward `to` (at `to_h`).
    pub fn toward(from: &Point, from_h: f64, to: &Point, to_h: f64) -> Self {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        Angles {
            azimuth: dy.atan2(dx),
            elevation: (to_h - from_h).atan2(dx.hypot(dy)),
        }
    }

    /// The two phase slopes of the planar-array response,
    /// `(sinθ·cosφ, sinθ·sinφ)`.
    #[inline]
    pub fn spatial_frequency(&self) -> (f64, f64) {
        let s = self.azimuth.sin();
        let (sin_el, cos_el) = self.elevation.sin_cos();
        (s * cos_el, s * sin_el)
    }

    /// Bring azimuth into [-π, π] and elevation into [-π/2, π/2].
    pub fn normalized(self) -> Self {
        Angles {
            azimuth: wrap_angle(self.azimuth),
            elevation: self.elevation.clamp(-PI / 2.0, PI / 2.0),
        }
    }
}

/// Wrap an angle into [-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI && a > 0.0 {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub bs_rows: usize,
    pub bs_cols: usize,
    pub ue_rows: usize,
    pub ue_cols: usize,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig { bs_rows: 8, bs_cols: 8, ue_rows: 4, ue_cols: 4 }
    }
}

impl ArrayConfig {
    pub fn n_bs(&self) -> usize {
        self.bs_rows * self.bs_cols
    }

    pub fn n_ue(&self) -> usize {
        self.ue_rows * self.ue_cols
    }

    pub fn validate(&self) -> Result<()> {
        if [self.bs_rows, self.bs_cols, self.ue_rows, self.ue_cols].contains(&0) {
            return invalid("array dimensions must be at least 1");
        }
        Ok(())
    }
}

/// Link-budget and cluster-model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub pathloss_exponent_los: f64,
    pub pathloss_exponent_nlos: f64,
    pub shadowing_los_db: f64,
    pub shadowing_nlos_db: f64,
    pub reference_distance_m: f64,
    /// Mean of the Poisson cluster count (clipped below at one).
    pub mean_clusters: f64,
    pub subpaths_per_cluster: usize,
    /// Standard deviation of subpath angles around the cluster center.
    pub subpath_spread_deg: f64,
    /// Exponent and lognormal spread of the uniform-exponential power split.
    pub power_split_r: f64,
    pub power_split_zeta_db: f64,
    /// Coherence intervals spent at each location index.
    pub cis_per_location: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_hz: 28e9,
            bandwidth_hz: 500e6,
            tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            pathloss_exponent_los: 3.0,
            pathloss_exponent_nlos: 4.0,
            shadowing_los_db: 3.6,
            shadowing_nlos_db: 9.7,
            reference_distance_m: 1.0,
            mean_clusters: 1.8,
            subpaths_per_cluster: 10,
            subpath_spread_deg: 10.0,
            power_split_r: 2.8,
            power_split_zeta_db: 4.0,
            cis_per_location: 1,
        }
    }
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Noise power σ²·W normalized by the transmit power (linear).
    pub fn normalized_noise(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - self.tx_power_dbm) / 10.0) * self.bandwidth_hz
    }

    /// `20·log10(4π d₀ / λ)`.
    pub fn free_space_db(&self) -> f64 {
        20.0 * (4.0 * PI * self.reference_distance_m / self.wavelength()).log10()
    }

    pub fn shadowing_db(&self, condition: LinkCondition) -> f64 {
        match condition {
            LinkCondition::Los => self.shadowing_los_db,
            LinkCondition::Nlos => self.shadowing_nlos_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return invalid("bandwidth must be positive");
        }
        if !(self.carrier_hz > 0.0) {
            return invalid("carrier frequency must be positive");
        }
        if !(self.reference_distance_m > 0.0) {
            return invalid("reference distance must be positive");
        }
        if self.subpaths_per_cluster == 0 {
            return invalid("at least one subpath per cluster is required");
        }
        if self.shadowing_los_db < 0.0 || self.shadowing_nlos_db < 0.0 || self.subpath_spread_deg < 0.0 {
            return invalid("spreads must be non-negative");
        }
        if !(self.mean_clusters > 0.0) {
            return invalid("mean cluster count must be positive");
        }
        if self.cis_per_location == 0 {
            return invalid("at least one CI per location is required");
        }
        Ok(())
    }
}

/// Half-wavelength uniform planar array response; entry `(r, c)` sits at
/// index `r·cols + c`. Every entry has unit modulus.
pub fn array_response(azimuth: f64, elevation: f64, rows: usize, cols: usize) -> Vec<Complex64> {
    let (sa, sb) = Angles::new(azimuth, elevation).spatial_frequency();
    response_from_frequency(sa, sb, rows, cols)
}

pub(crate) fn response_from_frequency(sa: f64, sb: f64, rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(Complex64::from_polar(1.0, PI * (r as f64 * sa + c as f64 * sb)));
        }
    }
    out
}

/// `Σ_{n<k} exp(jπ n x)`, one axis of a separable planar-array inner product.
#[inline]
pub(crate) fn axis_sum(x: f64, k: usize) -> Complex64 {
    let step = Complex64::from_polar(1.0, PI * x);
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = term;
    for _ in 1..k {
        term *= step;
        acc += term;
    }
    acc
}

/// Close-in reference-distance pathloss in dB, with shadowing drawn from `rng`.
pub fn pathloss_db<R: Rng + ?Sized>(
    d: f64,
    condition: LinkCondition,
    cfg: &RadioConfig,
    rng: &mut R,
) -> Result<f64> {
    if !(d >= cfg.reference_distance_m) {
        return Err(Error::Domain(format!(
            "distance {d} m is below the reference distance {} m",
            cfg.reference_distance_m
        )));
    }
    let sigma = cfg.shadowing_db(condition);
    let shadow = if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    } else {
        0.0
    };
    Ok(mean_pathloss_db(d, condition, cfg) + shadow)
}

/// Pathloss without shadowing. `d` must be at least the reference distance.
pub fn mean_pathloss_db(d: f64, condition: LinkCondition, cfg: &RadioConfig) -> f64 {
    let n = match condition {
        LinkCondition::Los => cfg.pathloss_exponent_los,
        LinkCondition::Nlos => cfg.pathloss_exponent_nlos,
    };
    cfg.free_space_db() + 10.0 * n * (d / cfg.reference_distance_m).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subpath {
    pub gain: Complex64,
    pub aod: Angles,
    pub aoa: Angles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCluster {
    pub index: usize,
    pub center_aod: Angles,
    pub center_aoa: Angles,
    /// Whether this cluster is the direct path.
    pub los: bool,
    pub subpaths: Vec<Subpath>,
}

impl PathCluster {
    /// Largest subpath amplitude.
    pub fn dominant_gain(&self) -> f64 {
        self.subpaths.iter().map(|s| s.gain.norm()).fold(0.0, f64::max)
    }

    /// RMS amplitude, `sqrt(Σ|h|² / R)`.
    pub fn rms_gain(&self) -> f64 {
        let r = self.subpaths.len().max(1) as f64;
        (self.subpaths.iter().map(|s| s.gain.norm_sqr()).sum::<f64>() / r).sqrt()
    }
}

/// Complex `N_UE × N_BS` channel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub n_ue: usize,
    pub n_bs: usize,
    pub entries: Vec<Complex64>,
    pub bs_id: usize,
    pub location_index: usize,
    pub ci_index: usize,
}

impl ChannelMatrix {
    pub fn zeros(n_ue: usize, n_bs: usize) -> Self {
        ChannelMatrix {
            n_ue,
            n_bs,
            entries: vec![Complex64::new(0.0, 0.0); n_ue * n_bs],
            bs_id: 0,
            location_index: 0,
            ci_index: 0,
        }
    }

    #[inline]
    pub fn get(&self, ue: usize, bs: usize) -> Complex64 {
        self.entries[ue * self.n_bs + bs]
    }

    /// `wᴴ H f`.
    pub fn bilinear(&self, f: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        if f.len() != self.n_bs || w.len() != self.n_ue {
            return Err(Error::Shape(format!(
                "H is {}x{}, got f of length {} and w of length {}",
                self.n_ue,
                self.n_bs,
                f.len(),
                w.len()
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, wu) in w.iter().enumerate() {
            let row = &self.entries[u * self.n_bs..(u + 1) * self.n_bs];
            let hf: Complex64 = row.iter().zip(f).map(|(h, x)| h * x).sum();
            acc += wu.conj() * hf;
        }
        Ok(acc)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| *e *= k);
        out
    }
}

/// Assemble H from its clusters: `(1/√R) Σ_p Σ_r h u_UE u_BSᴴ`, with R the
/// per-cluster subpath count.
pub fn channel_matrix(clusters: &[PathCluster], arrays: &ArrayConfig) -> ChannelMatrix {
    let mut h = ChannelMatrix::zeros(arrays.n_ue(), arrays.n_bs());
    for cluster in clusters {
        let scale = 1.0 / (cluster.subpaths.len().max(1) as f64).sqrt();
        for sp in &cluster.subpaths {
            let u_ue = array_response(sp.aoa.azimuth, sp.aoa.elevation, arrays.ue_rows, arrays.ue_cols);
            let u_bs = array_response(sp.aod.azimuth, sp.aod.elevation, arrays.bs_rows, arrays.bs_cols);
            let g = sp.gain * scale;
            for (u, a) in u_ue.iter().enumerate() {
                let ga = g * a;
                let row = &mut h.entries[u * h.n_bs..(u + 1) * h.n_bs];
                for (e, b) in row.iter_mut().zip(&u_bs) {
                    *e += ga * b.conj();
                }
            }
        }
    }
    h
}

/// Cluster center directions for one link, before powers and fading.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterLayout {
    /// `(AoD, AoA)` centers. When `los` is set the first entry is the direct path.
    pub centers: Vec<(Angles, Angles)>,
    pub los: bool,
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Unnormalized uniform-exponential cluster weights `U^(r−1)·10^(−Z/10)`
/// with `Z ~ N(0, ζ²)`.
pub fn power_weights<R: Rng + ?Sized>(k: usize, cfg: &RadioConfig, rng: &mut R) -> Vec<f64> {
    let lognormal = Normal::new(0.0, cfg.power_split_zeta_db.max(0.0)).expect("finite spread");
    (0..k)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            u.powf(cfg.power_split_r - 1.0) * 10f64.powf(-0.1 * lognormal.sample(rng))
        })
        .collect()
}

/// Uniform-exponential split of unit power across `k` clusters.
pub fn power_fractions<R: Rng + ?Sized>(k: usize, cfg: &RadioConfig, rng: &mut R) -> Vec<f64> {
    let mut raw = power_weights(k, cfg, rng);
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|x| *x /= total);
    raw
}

/// Draw cluster powers, subpath angles, and small-scale fading around a
/// layout. Total received power follows `pathloss_db`; in LoS the direct
/// cluster takes the largest power share.
pub fn draw_clusters<R: Rng + ?Sized>(
    layout: &ClusterLayout,
    pathloss_db: f64,
    cfg: &RadioConfig,
    rng: &mut R,
) -> Vec<PathCluster> {
    let k = layout.centers.len();
    if k == 0 {
        return Vec::new();
    }
    let mut fractions = power_fractions(k, cfg, rng);
    if layout.los {
        let (imax, _) = fractions
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &f)| if f > best.1 { (i, f) } else { best });
        fractions.swap(0, imax);
    }
    let path_power = 10f64.powf(-pathloss_db / 10.0);
    let spread = cfg.subpath_spread_deg.to_radians();
    let jitter = |rng: &mut R| -> f64 {
        if spread > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            spread * z
        } else {
            0.0
        }
    };
    layout
        .centers
        .iter()
        .zip(&fractions)
        .enumerate()
        .map(|(index, (&(aod, aoa), &frac))| {
            let amp = (frac * path_power).sqrt();
            let subpaths = (0..cfg.subpaths_per_cluster)
                .map(|_| Subpath {
                    gain: complex_normal(rng) * amp,
                    aod: Angles::new(aod.azimuth + jitter(rng), aod.elevation + jitter(rng)).normalized(),
                    aoa: Angles::new(aoa.azimuth + jitter(rng), aoa.elevation + jitter(rng)).normalized(),
                })
                .collect();
            PathCluster { index, center_aod: aod, center_aoa: aoa, los: layout.los && index == 0, subpaths }
        })
        .collect()
}

/// Draw a standalone channel for `bs` toward a UE at `ue`.
///
/// The cluster count is `max(Poisson(mean_clusters), 1)`; in LoS the first
/// cluster points along the geometric direct path, the others have centers
/// uniform over azimuth and elevation.
pub fn generate_channel<R: Rng + ?Sized>(
    bs: &BaseStation,
    ue: &Point,
    ue_height: f64,
    link: &LinkState,
    arrays: &ArrayConfig,
    cfg: &RadioConfig,
    rng: &mut R,
) -> Result<(ChannelMatrix, Vec<PathCluster>)> {
    let pl = pathloss_db(link.distance_3d, link.condition, cfg, rng)?;
    let poisson = Poisson::new(cfg.mean_clusters).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let count = (poisson.sample(rng) as usize).max(1);
    let mut centers = Vec::with_capacity(count);
    let los = link.condition.is_los();
    if los {
        centers.push((
            Angles::toward(&bs.position, bs.height, ue, ue_height),
            Angles::toward(ue, ue_height, &bs.position, bs.height),
        ));
    }
    while centers.len() < count {
        let mut uniform = || Angles::new(rng.random_range(-PI..PI), rng.random_range(-PI / 2.0..PI / 2.0));
        let aod = uniform();
        let aoa = uniform();
        centers.push((aod, aoa));
    }
    let clusters = draw_clusters(&ClusterLayout { centers, los }, pl, cfg, rng);
    let mut h = channel_matrix(&clusters, arrays);
    h.bs_id = bs.id;
    h.location_index = link.location_index;
    Ok((h, clusters))
}

/// `|wᴴ H f|² / (σ² W)` with σ² normalized by the transmit power.
pub fn snr_linear(h: &ChannelMatrix, f: &[Complex64], w: &[Complex64], cfg: &RadioConfig) -> Result<f64> {
    Ok(h.bilinear(f, w)?.norm_sqr() / cfg.normalized_noise())
}

/// SNR for a beamformed power gain `|wᴴ H f|²`.
pub fn snr_from_gain(gain: f64, cfg: &RadioConfig) -> f64 {
    gain / cfg.normalized_noise()
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Achievable rate `W·log2(1 + SNR)` in bits per second.
pub fn rate_bps(snr_linear: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + snr_linear.max(0.0)).log2()
}
