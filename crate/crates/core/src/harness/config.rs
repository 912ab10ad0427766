use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::EdPolicy;
use crate::channel::{ArrayConfig, RadioConfig};
use crate::environment::{BlockageModel, Extent, Heights, Mobility, Point};
use crate::error::{invalid, Result};
use crate::handover::HandoverConfig;
use crate::learning::LearningConfig;
use crate::skeleton::{DistanceWeights, ThresholdPolicy};

/// Backup-selection and skeleton-refresh combination under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Ours,
    OursEd,
    MultiConnectivity,
    SmartUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::Ours, PolicyKind::OursEd, PolicyKind::MultiConnectivity, PolicyKind::SmartUcb];

    pub fn key(self) -> &'static str {
        match self {
            PolicyKind::Ours => "ours",
            PolicyKind::OursEd => "ours-ed",
            PolicyKind::MultiConnectivity => "multi-connectivity",
            PolicyKind::SmartUcb => "smart-ucb",
        }
    }

    pub fn needs_q_table(self) -> bool {
        matches!(self, PolicyKind::Ours | PolicyKind::OursEd)
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| crate::error::Error::InvalidConfig(format!("unknown policy `{s}`")))
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Zone, deployment, and trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub width_m: f64,
    pub height_m: f64,
    /// BS per square meter.
    pub density: f64,
    /// Fixed BS positions; when empty the BSs are dropped as a PPP.
    pub base_stations: Vec<[f64; 2]>,
    pub waypoints: Vec<[f64; 2]>,
    pub spacing_m: f64,
    pub mobility: Mobility,
    pub speed_kmh: Option<f64>,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let h = Heights::default();
        ScenarioConfig {
            width_m: 100.0,
            height_m: 100.0,
            density: 5e-4,
            base_stations: Vec::new(),
            waypoints: vec![[0.0, 50.0], [100.0, 50.0]],
            spacing_m: 2.0,
            mobility: Mobility::Pedestrian,
            speed_kmh: None,
            bs_height_m: h.bs,
            ue_height_m: h.ue,
        }
    }
}

impl ScenarioConfig {
    pub fn extent(&self) -> Extent {
        Extent { width: self.width_m, height: self.height_m }
    }

    pub fn heights(&self) -> Heights {
        Heights { bs: self.bs_height_m, ue: self.ue_height_m }
    }

    pub fn waypoint_points(&self) -> Vec<Point> {
        self.waypoints.iter().map(|p| Point::new(p[0], p[1])).collect()
    }
}

/// How episodes randomize the links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Correlation length of LoS/NLoS states along the trajectory.
    pub blockage_decorrelation_m: f64,
    /// Correlation length of shadowing along the trajectory.
    pub shadowing_decorrelation_m: f64,
    /// Scatterers are placed at heights uniform in `[0, reflector_max_height_m]`.
    pub reflector_max_height_m: f64,
    /// Paths kept in a skeleton.
    pub max_paths: usize,
    /// Codebook samples per array element along each axis.
    pub oversampling: usize,
    /// Channel-trace CSV replacing the synthetic model.
    pub trace: Option<PathBuf>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            blockage_decorrelation_m: 10.0,
            shadowing_decorrelation_m: 10.0,
            reflector_max_height_m: 10.0,
            max_paths: 4,
            oversampling: 2,
            trace: None,
        }
    }
}

impl WorldConfig {
    pub fn blockage(&self) -> BlockageModel {
        BlockageModel { decorrelation_m: self.blockage_decorrelation_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkeletonConfig {
    /// Skeleton-distance threshold; tuned when absent.
    pub t_d: Option<f64>,
    #[serde(flatten)]
    pub budget: ThresholdPolicy,
    pub t_aging: u32,
    pub grid_size_m: f64,
    pub gain_weight_per_db: f64,
    /// Episodes in the tuning set.
    pub tune_episodes: u64,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig {
            t_d: None,
            budget: ThresholdPolicy::default(),
            t_aging: 50,
            grid_size_m: 5.0,
            gain_weight_per_db: DistanceWeights::default().gain_per_db,
            tune_episodes: 400,
        }
    }
}

impl SkeletonConfig {
    pub fn weights(&self) -> DistanceWeights {
        DistanceWeights { gain_per_db: self.gain_weight_per_db }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UcbConfig {
    pub c: f64,
    /// Rates are divided by this before entering the UCB means.
    pub reward_ref_bps: f64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        UcbConfig { c: 1.0, reward_ref_bps: 10e9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiConnectivityConfig {
    /// Width of the quality bins used to rank BSs, dB.
    pub level_step_db: f64,
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for MultiConnectivityConfig {
    fn default() -> Self {
        MultiConnectivityConfig { level_step_db: 1.0, min_db: -40.0, max_db: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: u64,
    pub policies: Vec<PolicyKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { seed: 1, replications: 500, policies: PolicyKind::ALL.to_vec() }
    }
}

/// Everything needed to run an experiment; loads from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub world: WorldConfig,
    pub radio: RadioConfig,
    pub arrays: ArrayConfig,
    pub handover: HandoverConfig,
    pub learning: LearningConfig,
    pub skeleton: SkeletonConfig,
    pub ed: EdPolicy,
    pub ucb: UcbConfig,
    pub multi_connectivity: MultiConnectivityConfig,
    pub experiment: ExperimentConfig,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = SimConfig::from_toml_str(&text)?;
        // Trace paths are relative to the scenario file.
        if let (Some(t), Some(dir)) = (cfg.world.trace.as_mut(), path.parent()) {
            if t.is_relative() {
                *t = dir.join(&*t);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if !(s.width_m > 0.0 && s.height_m > 0.0) {
            return invalid("zone extent must have positive area");
        }
        if s.base_stations.is_empty() && !(s.density > 0.0) {
            return invalid(format!("BS density must be positive, got {}", s.density));
        }
        if s.waypoints.len() < 2 {
            return invalid("a trajectory needs at least two waypoints");
        }
        if !(s.spacing_m > 0.0) {
            return invalid(format!("trajectory spacing must be positive, got {}", s.spacing_m));
        }
        if !(s.bs_height_m >= 0.0 && s.ue_height_m >= 0.0) {
            return invalid("antenna heights must be non-negative");
        }
        let w = &self.world;
        if w.blockage_decorrelation_m < 0.0 || w.shadowing_decorrelation_m < 0.0 || w.reflector_max_height_m < 0.0 {
            return invalid("decorrelation lengths and reflector height must be non-negative");
        }
        if w.max_paths == 0 || w.oversampling == 0 {
            return invalid("max_paths and oversampling must be at least one");
        }
        self.radio.validate()?;
        self.arrays.validate()?;
        self.handover.validate()?;
        self.learning.validate()?;
        self.skeleton.budget.validate()?;
        if let Some(t) = self.skeleton.t_d {
            if !(t >= 0.0) {
                return invalid(format!("T_D must be non-negative, got {t}"));
            }
        }
        if !(self.skeleton.grid_size_m > 0.0) || self.skeleton.gain_weight_per_db < 0.0 {
            return invalid("grid size must be positive and the gain weight non-negative");
        }
        if self.skeleton.tune_episodes == 0 {
            return invalid("tune_episodes must be at least one");
        }
        self.ed.validate()?;
        if !(self.ucb.c >= 0.0) || !(self.ucb.reward_ref_bps > 0.0) {
            return invalid("UCB constant must be non-negative and the reward reference positive");
        }
        let m = &self.multi_connectivity;
        if !(m.level_step_db > 0.0) || !(m.max_db > m.min_db) {
            return invalid("multi-connectivity quality bins are empty");
        }
        if self.experiment.replications == 0 {
            return invalid("replications must be at least one");
        }
        Ok(())
    }

    /// Fine quantizer used by multi-connectivity to rank BSs. Its
    /// acceptability threshold matches the two-level one.
    pub fn multi_connectivity_levels(&self) -> Result<HandoverConfig> {
        let m = &self.multi_connectivity;
        let t_ho_db = self.handover.boundaries_db[self.handover.t_ho_level - 1];
        let steps = ((m.max_db - m.min_db) / m.level_step_db).round() as usize;
        let mut boundaries_db: Vec<f64> = (1..steps).map(|k| m.min_db + m.level_step_db * k as f64).collect();
        if !boundaries_db.iter().any(|b| (b - t_ho_db).abs() < 1e-9) {
            boundaries_db.push(t_ho_db);
            boundaries_db.sort_by(f64::total_cmp);
        }
        let t_ho_level = boundaries_db.iter().position(|b| (b - t_ho_db).abs() < 1e-9).map(|p| p + 1).unwrap_or(1);
        let cfg = HandoverConfig { boundaries_db, t_ho_level, ..self.handover.clone() };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handover::quantize_snr;

    #[test]
    fn defaults_round_trip() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file() {
        let cfg = SimConfig::from_toml_str(
            "[scenario]\ndensity = 1e-3\n[skeleton]\nt_d = 0.5\nu_max = 8\n[experiment]\npolicies = [\"ours\", \"smart-ucb\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.density, 1e-3);
        assert_eq!(cfg.skeleton.t_d, Some(0.5));
        assert_eq!(cfg.skeleton.budget.u_max, 8);
        assert_eq!(cfg.experiment.policies, vec![PolicyKind::Ours, PolicyKind::SmartUcb]);
        assert_eq!(cfg.radio, RadioConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimConfig::from_toml_str("[scenario]\nspacing_m = 0.0\n").is_err());
        assert!(SimConfig::from_toml_str("[experiment]\npolicies = [\"nope\"]\n").is_err());
        assert!(SimConfig::from_toml_str("[learning]\nalpha = 2.0\n").is_err());
        assert!(SimConfig::from_toml_str("[handover]\nt_ho_level = 3\n").is_err());
    }

    #[test]
    fn fine_levels_share_threshold() {
        let cfg = SimConfig::default();
        let fine = cfg.multi_connectivity_levels().unwrap();
        for snr in [-50.0, 0.0, 39.9, 40.0, 40.1, 75.0, 200.0] {
            assert_eq!(fine.acceptable(quantize_snr(snr, &fine)), cfg.handover.acceptable(quantize_snr(snr, &cfg.handover)));
        }
        assert!(quantize_snr(45.5, &fine) > quantize_snr(44.5, &fine));
    }

    #[test]
    fn policy_keys() {
        for p in PolicyKind::ALL {
            assert_eq!(p.key().parse::<PolicyKind>().unwrap(), p);
        }
    }
}
