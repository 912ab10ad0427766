use serde::{Deserialize, Serialize};

use super::world::{Episode, World};
use crate::baselines::{ed_should_refresh, multi_connectivity_step, EdPolicy};
use crate::channel::{rate_bps, snr_from_gain, to_db};
use crate::error::Result;
use crate::handover::{quantize_snr, HandoverConfig, SnrLogTable};
use crate::learning::{EpisodicEnv, RlState, StateSpace, Transition};
use crate::skeleton::{skeleton_distance, skeleton_sparse, DistanceWeights, SkeletonDatabase};

/// When a link's reference skeleton is renewed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refresh {
    /// Renew once the current skeleton is farther than `t_d` from the reference.
    Distance { t_d: f64, weights: DistanceWeights },
    /// Renew every fixed stretch of trajectory.
    Euclidean(EdPolicy),
}

#[derive(Debug, Clone, Default)]
struct LinkTrack {
    reference: Option<crate::skeleton::PathSkeleton>,
    ref_location: usize,
    renewals: u32,
}

/// Per-link reference skeletons, the per-BS skeleton databases, and the
/// renewal counters `U`.
#[derive(Debug, Clone)]
pub struct Tracker {
    refresh: Refresh,
    dbs: Vec<SkeletonDatabase>,
    links: Vec<LinkTrack>,
}

impl Tracker {
    pub fn new(n_bs: usize, refresh: Refresh, grid_size: f64, t_aging: u32) -> Result<Self> {
        Ok(Tracker {
            refresh,
            dbs: (0..n_bs).map(|_| SkeletonDatabase::new(grid_size, t_aging)).collect::<Result<_>>()?,
            links: vec![LinkTrack::default(); n_bs],
        })
    }

    /// Renewals of every link so far, initial acquisitions excluded.
    pub fn renewals(&self) -> Vec<u32> {
        self.links.iter().map(|l| l.renewals).collect()
    }

    pub fn database(&self, j: usize) -> &SkeletonDatabase {
        &self.dbs[j]
    }

    /// Age every database by one CI.
    pub fn tick(&mut self) {
        self.dbs.iter_mut().for_each(SkeletonDatabase::tick);
    }

    fn rebuild(&mut self, ep: &mut Episode<'_>, j: usize, i: usize, count: bool) {
        let p = ep.world().trajectory.points[i];
        let db = &mut self.dbs[j];
        let grid = db.grid_id(&p);
        db.invalidate(grid);
        let mut fresh = ep.link(j, i).skeleton.clone();
        fresh.grid_id = grid;
        let (s, _) = db.query(grid, || Some(fresh)).expect("rebuild always succeeds");
        let l = &mut self.links[j];
        l.reference = Some(s);
        l.ref_location = i;
        if count {
            l.renewals += 1;
        }
    }

    fn acquire(&mut self, ep: &mut Episode<'_>, j: usize, i: usize) {
        let p = ep.world().trajectory.points[i];
        let db = &mut self.dbs[j];
        let grid = db.grid_id(&p);
        let mut fresh = ep.link(j, i).skeleton.clone();
        fresh.grid_id = grid;
        let (s, _) = db.query(grid, || Some(fresh)).expect("rebuild always succeeds");
        self.links[j] = LinkTrack { reference: Some(s), ref_location: i, renewals: self.links[j].renewals };
    }

    fn needs_renewal(&self, ep: &mut Episode<'_>, j: usize, i: usize) -> bool {
        let l = &self.links[j];
        let Some(reference) = &l.reference else { return false };
        let current = &ep.link(j, i).skeleton;
        if reference.is_empty() {
            return !current.is_empty();
        }
        match self.refresh {
            Refresh::Distance { t_d, weights } => skeleton_distance(reference, current, weights) > t_d,
            Refresh::Euclidean(ed) => {
                let t = &ep.world().trajectory;
                ed_should_refresh(t.arclength(i) - t.arclength(l.ref_location) + 1e-9, &ed)
            }
        }
    }

    /// Beamformed gain `|wᴴHf|²` of link `j` at location `i`, renewing the
    /// reference skeleton first when the refresh rule asks for it.
    pub fn probe(&mut self, ep: &mut Episode<'_>, j: usize, i: usize) -> f64 {
        if self.links[j].reference.is_none() {
            self.acquire(ep, j, i);
        } else if self.needs_renewal(ep, j, i) {
            let reused = match self.refresh {
                Refresh::Distance { t_d, weights } => {
                    let p = ep.world().trajectory.points[i];
                    let db = &self.dbs[j];
                    let current = &ep.link(j, i).skeleton;
                    db.get(db.grid_id(&p))
                        .filter(|s| Some(*s) != self.links[j].reference.as_ref())
                        .filter(|s| skeleton_distance(s, current, weights) <= t_d)
                        .cloned()
                }
                Refresh::Euclidean(_) => None,
            };
            match reused {
                Some(s) => {
                    self.links[j].reference = Some(s);
                    self.links[j].ref_location = i;
                }
                None => self.rebuild(ep, j, i, true),
            }
        }
        self.gain(ep, j, i)
    }

    /// Gain with the current reference, no renewal check.
    pub fn peek(&mut self, ep: &mut Episode<'_>, j: usize, i: usize) -> f64 {
        if self.links[j].reference.is_none() {
            self.acquire(ep, j, i);
        }
        self.gain(ep, j, i)
    }

    fn gain(&self, ep: &mut Episode<'_>, j: usize, i: usize) -> f64 {
        let w = ep.world();
        let reference = self.links[j].reference.as_ref().expect("acquired");
        let link = ep.link(j, i);
        skeleton_sparse(&link.channel, &w.f_book, &w.w_book, reference).map_or(0.0, |b| b.gain.max(0.0))
    }
}

/// Per-episode results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Rate at each location index, bps (mean over the location's CIs).
    pub rates: Vec<f64>,
    /// Serving BS after the last decision at each location.
    pub serving: Vec<usize>,
    pub handover_flags: Vec<bool>,
    pub handovers: u32,
    pub link_failures: u32,
    /// Skeleton renewals per BS.
    pub renewals: Vec<u32>,
    /// Channel probes (pilot mini-slots) spent.
    pub probes: u64,
}

impl EpisodeMetrics {
    fn new(m: usize) -> Self {
        EpisodeMetrics {
            rates: vec![0.0; m],
            serving: vec![0; m],
            handover_flags: vec![false; m],
            handovers: 0,
            link_failures: 0,
            renewals: Vec::new(),
            probes: 0,
        }
    }

    /// Trajectory rate, `Σ_i R(i)`.
    pub fn r_traj(&self) -> f64 {
        crate::learning::trajectory_return(&self.rates)
    }
}

/// Shared settings of every episode runner.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub handover: HandoverConfig,
    pub refresh: Refresh,
    pub grid_size: f64,
    pub t_aging: u32,
}

fn snr_db(gain: f64, w: &World) -> f64 {
    to_db(snr_from_gain(gain, &w.radio))
}

/// One UE running the probe-two-BSs handover rule along the trajectory,
/// one CI per `step`. Actions are backup BSs.
pub struct HandoverEnv<'w> {
    world: &'w World,
    settings: RunSettings,
    space: StateSpace,
    phase: u64,
    episode: Option<Episode<'w>>,
    tracker: Tracker,
    table: SnrLogTable,
    serving: usize,
    location: usize,
    ci: usize,
    metrics: EpisodeMetrics,
}

impl<'w> HandoverEnv<'w> {
    pub fn new(world: &'w World, settings: RunSettings, phase: u64) -> Result<Self> {
        settings.handover.validate()?;
        let n = world.n_bs();
        let space = StateSpace::new(world.n_locations(), n, settings.handover.levels())?;
        Ok(HandoverEnv {
            world,
            tracker: Tracker::new(n, settings.refresh, settings.grid_size, settings.t_aging)?,
            settings,
            space,
            phase,
            episode: None,
            table: SnrLogTable::new(n),
            serving: 0,
            location: 0,
            ci: 0,
            metrics: EpisodeMetrics::new(world.n_locations()),
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    /// State seen by the backup selector before the current CI. A serving
    /// link not yet probed counts as the top level.
    pub fn state(&self) -> RlState {
        RlState {
            location: self.location,
            serving: self.serving,
            level: self.table.level(self.serving).unwrap_or(self.space.levels),
        }
    }

    pub fn state_index(&self) -> usize {
        self.space.index(self.state()).expect("state stays in range")
    }

    pub fn done(&self) -> bool {
        self.location >= self.space.locations
    }

    /// Metrics of the episode in progress (complete once `done`).
    pub fn metrics(&self) -> EpisodeMetrics {
        let mut m = self.metrics.clone();
        m.renewals = self.tracker.renewals();
        m
    }
}

impl EpisodicEnv for HandoverEnv<'_> {
    fn n_states(&self) -> usize {
        self.space.len()
    }

    fn n_actions(&self) -> usize {
        self.space.bss
    }

    fn reset(&mut self, episode: u64) -> Result<usize> {
        let ep = self.world.episode(self.phase, episode);
        self.serving = self.world.initial_serving(&ep);
        self.episode = Some(ep);
        self.tracker = Tracker::new(self.world.n_bs(), self.settings.refresh, self.settings.grid_size, self.settings.t_aging)?;
        self.table = SnrLogTable::new(self.world.n_bs());
        self.location = 0;
        self.ci = 0;
        self.metrics = EpisodeMetrics::new(self.world.n_locations());
        Ok(self.state_index())
    }

    fn excluded_action(&self) -> Option<usize> {
        Some(self.serving)
    }

    fn step(&mut self, backup: usize) -> Result<Transition> {
        let world = self.world;
        let i = self.location;
        let ep = self.episode.as_mut().expect("reset before step");
        let tracker = &mut self.tracker;
        let ho = &self.settings.handover;
        let mut probed: [(usize, f64); 2] = [(usize::MAX, 0.0); 2];
        let mut n_probed = 0;
        let rec = self.table.step_ci(i, self.serving, backup, ho, |j| {
            let g = tracker.probe(ep, j, i);
            probed[n_probed] = (j, g);
            n_probed += 1;
            Ok(quantize_snr(snr_db(g, world), ho))
        })?;
        self.metrics.probes += n_probed as u64;
        let next = rec.next_serving;
        let rate = if rec.link_failure {
            self.metrics.link_failures += 1;
            0.0
        } else {
            let g = match probed[..n_probed].iter().find(|(j, _)| *j == next) {
                Some(&(_, g)) => g,
                None => tracker.peek(ep, next, i),
            };
            rate_bps(snr_from_gain(g, &world.radio), world.radio.bandwidth_hz)
        };
        tracker.tick();
        let cis = world.radio.cis_per_location;
        self.metrics.rates[i] += rate / cis as f64;
        if rec.handover {
            self.metrics.handovers += 1;
            self.metrics.handover_flags[i] = true;
        }
        self.metrics.serving[i] = next;
        self.serving = next;
        self.ci += 1;
        if self.ci == cis {
            self.ci = 0;
            self.location += 1;
        }
        let next_state = if self.done() { None } else { Some(self.state_index()) };
        Ok(Transition { reward: rate, next: next_state, truncated: false })
    }
}

/// Multi-connectivity: every CI probes all BSs and ranks them on the fine
/// quantizer `fine`.
pub fn run_multi_connectivity(
    world: &World,
    settings: &RunSettings,
    fine: &HandoverConfig,
    phase: u64,
    episode: u64,
) -> Result<EpisodeMetrics> {
    let n = world.n_bs();
    let m = world.n_locations();
    let mut ep = world.episode(phase, episode);
    let mut tracker = Tracker::new(n, settings.refresh, settings.grid_size, settings.t_aging)?;
    let mut serving = world.initial_serving(&ep);
    let mut metrics = EpisodeMetrics::new(m);
    let cis = world.radio.cis_per_location;
    let mut gains = vec![0.0; n];
    let mut levels = vec![0; n];
    for i in 0..m {
        for _ in 0..cis {
            for j in 0..n {
                gains[j] = tracker.probe(&mut ep, j, i);
                levels[j] = quantize_snr(snr_db(gains[j], world), fine);
            }
            metrics.probes += n as u64;
            let d = multi_connectivity_step(&levels, serving, fine)?;
            let rate = if d.link_failure {
                metrics.link_failures += 1;
                0.0
            } else {
                rate_bps(snr_from_gain(gains[d.next_serving], &world.radio), world.radio.bandwidth_hz)
            };
            if d.next_serving != serving {
                metrics.handovers += 1;
                metrics.handover_flags[i] = true;
            }
            serving = d.next_serving;
            metrics.rates[i] += rate / cis as f64;
            tracker.tick();
        }
        metrics.serving[i] = serving;
    }
    metrics.renewals = tracker.renewals();
    Ok(metrics)
}

/// Track one link along the whole trajectory, probing it at every location.
/// Returns the summed rate and the renewal count.
pub fn track_link(world: &World, settings: &RunSettings, phase: u64, episode: u64, j: usize) -> Result<(f64, u32)> {
    let mut ep = world.episode(phase, episode);
    let mut tracker = Tracker::new(world.n_bs(), settings.refresh, settings.grid_size, settings.t_aging)?;
    let mut total = 0.0;
    for i in 0..world.n_locations() {
        let g = tracker.probe(&mut ep, j, i);
        total += rate_bps(snr_from_gain(g, &world.radio), world.radio.bandwidth_hz);
        tracker.tick();
    }
    Ok((total, tracker.renewals()[j]))
}
