use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PolicyKind, SimConfig};
use super::episode::{run_multi_connectivity, track_link, EpisodeMetrics, HandoverEnv, Refresh, RunSettings};
use super::world::World;
use crate::baselines::{ucb_select, UcbStats};
use crate::error::{invalid, Result};
use crate::learning::{self, EpisodicEnv, QTable, StateSpace};
use crate::rng::{stream, tag};
use crate::skeleton::{optimize_threshold, skeleton_distance, ThresholdEval, ThresholdOutcome};

/// Stream families. Training, tuning and evaluation never share channels.
pub mod phase {
    use crate::rng::tag;
    pub const TRAIN: u64 = tag::TRAIN_WORLD;
    pub const EVAL: u64 = tag::EVAL_WORLD;
    pub const TUNE: u64 = tag::TUNE_WORLD;
}

pub fn run_settings(cfg: &SimConfig, refresh: Refresh) -> RunSettings {
    RunSettings {
        handover: cfg.handover.clone(),
        refresh,
        grid_size: cfg.skeleton.grid_size_m,
        t_aging: cfg.skeleton.t_aging,
    }
}

/// Skeleton refresh rule a policy runs with.
pub fn refresh_for(cfg: &SimConfig, policy: PolicyKind, t_d: f64) -> Refresh {
    match policy {
        PolicyKind::OursEd => Refresh::Euclidean(cfg.ed),
        _ => Refresh::Distance { t_d, weights: cfg.skeleton.weights() },
    }
}

/// Largest finite skeleton distance seen between two locations of any
/// tuning link.
pub fn distance_bracket(world: &World, cfg: &SimConfig) -> f64 {
    let w = cfg.skeleton.weights();
    let m = world.n_locations();
    let mut hi: f64 = 0.0;
    for e in 0..cfg.skeleton.tune_episodes {
        let mut ep = world.episode(phase::TUNE, e);
        for j in 0..world.n_bs() {
            let sk: Vec<_> = (0..m).map(|i| ep.link(j, i).skeleton.clone()).collect();
            for a in 0..m {
                for b in a + 1..m {
                    let d = skeleton_distance(&sk[a], &sk[b], w);
                    if d.is_finite() {
                        hi = hi.max(d);
                    }
                }
            }
        }
    }
    hi
}

/// Mean trajectory rate and `Pr{U > U_max}` over every tuning link tracked
/// with threshold `t_d`.
pub fn evaluate_threshold(world: &World, cfg: &SimConfig, t_d: f64) -> Result<ThresholdEval> {
    let settings = run_settings(cfg, Refresh::Distance { t_d, weights: cfg.skeleton.weights() });
    let links: Vec<(u64, usize)> =
        (0..cfg.skeleton.tune_episodes).flat_map(|e| (0..world.n_bs()).map(move |j| (e, j))).collect();
    let runs = links
        .par_iter()
        .map(|&(e, j)| track_link(world, &settings, phase::TUNE, e, j))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let u_max = cfg.skeleton.budget.u_max;
    Ok(ThresholdEval {
        mean_rate: runs.iter().map(|r| r.0).sum::<f64>() / n,
        exceed_prob: runs.iter().filter(|r| r.1 > u_max).count() as f64 / n,
    })
}

pub fn tune_threshold(world: &World, cfg: &SimConfig) -> Result<ThresholdOutcome> {
    let hi = distance_bracket(world, cfg);
    optimize_threshold(hi, cfg.skeleton.budget, |t| evaluate_threshold(world, cfg, t))
}

/// Configured `T_D`, or the tuned one when none is set.
pub fn resolve_t_d(world: &World, cfg: &SimConfig) -> Result<f64> {
    match cfg.skeleton.t_d {
        Some(t) => Ok(t),
        None => Ok(tune_threshold(world, cfg)?.t_d),
    }
}

/// A trained backup-selection table with the skeleton threshold it was
/// trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub space: StateSpace,
    pub q: QTable,
    pub t_d: f64,
}

/// Metadata written next to a Q-table file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySidecar {
    pub t_d: f64,
    pub seed: u64,
    pub episodes: u64,
}

/// Q-learning over `cfg.learning.episodes` training episodes. Returns the
/// table and each episode's raw return.
pub fn train(world: &World, cfg: &SimConfig, policy: PolicyKind, t_d: f64) -> Result<(TrainedPolicy, Vec<f64>)> {
    if !policy.needs_q_table() {
        return invalid(format!("policy {policy} is not trained"));
    }
    let mut env = HandoverEnv::new(world, run_settings(cfg, refresh_for(cfg, policy, t_d)), phase::TRAIN)?;
    let space = env.space();
    let mut q = QTable::for_space(&space);
    let mut rng = stream(world.seed, &[tag::EXPLORATION]);
    let returns = learning::train(&mut env, &mut q, &cfg.learning, &mut rng)?;
    Ok((TrainedPolicy { space, q, t_d }, returns))
}

fn rollout<F>(env: &mut HandoverEnv<'_>, episode: u64, mut choose: F) -> Result<EpisodeMetrics>
where
    F: FnMut(&HandoverEnv<'_>, usize) -> Result<usize>,
{
    let mut s = env.reset(episode)?;
    loop {
        let a = choose(env, s)?;
        match env.step(a)?.next {
            Some(n) => s = n,
            None => break,
        }
    }
    Ok(env.metrics())
}

/// Greedy rollout of a trained table on evaluation episode `episode`.
pub fn run_trained(
    world: &World,
    cfg: &SimConfig,
    policy: PolicyKind,
    trained: &TrainedPolicy,
    t_d: f64,
    episode: u64,
) -> Result<EpisodeMetrics> {
    let mut env = HandoverEnv::new(world, run_settings(cfg, refresh_for(cfg, policy, t_d)), phase::EVAL)?;
    if env.space() != trained.space {
        return invalid("policy table was trained on a different state space");
    }
    rollout(&mut env, episode, |env, s| Ok(trained.q.argmax(s, env.excluded_action())))
}

/// SMART-UCB over `replications` evaluation episodes. Its statistics carry
/// over from one episode to the next.
pub fn run_smart_ucb(world: &World, cfg: &SimConfig, t_d: f64, replications: u64) -> Result<Vec<EpisodeMetrics>> {
    let mut env = HandoverEnv::new(world, run_settings(cfg, refresh_for(cfg, PolicyKind::SmartUcb, t_d)), phase::EVAL)?;
    let mut stats = UcbStats::new(env.n_states(), env.n_actions());
    let (c, scale) = (cfg.ucb.c, cfg.ucb.reward_ref_bps);
    (0..replications)
        .map(|r| {
            let mut s = env.reset(r)?;
            loop {
                let a = ucb_select(&stats, s, c, env.excluded_action())?;
                let t = env.step(a)?;
                stats.update(s, a, t.reward / scale)?;
                match t.next {
                    Some(n) => s = n,
                    None => break,
                }
            }
            Ok(env.metrics())
        })
        .collect()
}

/// Episodes of one policy, in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub episodes: Vec<EpisodeMetrics>,
}

/// Evaluate `policy` on evaluation episodes `0..replications`. Every policy
/// sees the same channels for the same replication index.
pub fn evaluate(
    world: &World,
    cfg: &SimConfig,
    policy: PolicyKind,
    trained: Option<&TrainedPolicy>,
    t_d: f64,
    replications: u64,
) -> Result<PolicyRun> {
    let episodes = match policy {
        PolicyKind::Ours | PolicyKind::OursEd => {
            let Some(trained) = trained else {
                return invalid(format!("policy {policy} needs a trained table"));
            };
            (0..replications)
                .into_par_iter()
                .map(|r| run_trained(world, cfg, policy, trained, t_d, r))
                .collect::<Result<Vec<_>>>()?
        }
        PolicyKind::MultiConnectivity => {
            let fine = cfg.multi_connectivity_levels()?;
            let settings = run_settings(cfg, refresh_for(cfg, policy, t_d));
            (0..replications)
                .into_par_iter()
                .map(|r| run_multi_connectivity(world, &settings, &fine, phase::EVAL, r))
                .collect::<Result<Vec<_>>>()?
        }
        PolicyKind::SmartUcb => run_smart_ucb(world, cfg, t_d, replications)?,
    };
    Ok(PolicyRun { policy, episodes })
}

/// Aggregates of one policy's episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub replications: usize,
    pub mean_r_traj: f64,
    pub std_r_traj: f64,
    pub mean_handovers: f64,
    pub median_handovers: f64,
    /// Mean and standard deviation of `R(i)` across replications, per location.
    pub rate_mean: Vec<f64>,
    pub rate_std: Vec<f64>,
    /// Standard deviation across locations of the mean rate profile.
    pub rate_fluctuation: f64,
    /// `histogram[k]` episodes had `k` handovers.
    pub handover_histogram: Vec<u64>,
    /// Mean renewals per link, and the fraction of links above the budget.
    pub mean_renewals: f64,
    pub renewal_exceed_prob: f64,
    pub mean_probes: f64,
    pub mean_link_failures: f64,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

/// Sample standard deviation; zero for a single value.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn summarize(run: &PolicyRun, u_max: u32) -> Result<PolicySummary> {
    let eps = &run.episodes;
    if eps.is_empty() {
        return invalid("no episodes to summarize");
    }
    let m = eps[0].rates.len();
    let r_traj: Vec<f64> = eps.iter().map(EpisodeMetrics::r_traj).collect();
    let hos: Vec<f64> = eps.iter().map(|e| e.handovers as f64).collect();
    let rate_mean: Vec<f64> = (0..m).map(|i| mean(eps.iter().map(|e| e.rates[i]))).collect();
    let rate_std: Vec<f64> = (0..m).map(|i| std_dev(&eps.iter().map(|e| e.rates[i]).collect::<Vec<_>>())).collect();
    let profile_mean = mean(rate_mean.iter().copied());
    let rate_fluctuation = (rate_mean.iter().map(|r| (r - profile_mean).powi(2)).sum::<f64>() / m as f64).sqrt();
    let max_ho = eps.iter().map(|e| e.handovers as usize).max().unwrap_or(0);
    let mut handover_histogram = vec![0; max_ho + 1];
    for e in eps {
        handover_histogram[e.handovers as usize] += 1;
    }
    let renewals: Vec<u32> = eps.iter().flat_map(|e| e.renewals.iter().copied()).collect();
    Ok(PolicySummary {
        policy: run.policy,
        replications: eps.len(),
        mean_r_traj: mean(r_traj.iter().copied()),
        std_r_traj: std_dev(&r_traj),
        mean_handovers: mean(hos.iter().copied()),
        median_handovers: median(hos),
        rate_mean,
        rate_std,
        rate_fluctuation,
        handover_histogram,
        mean_renewals: mean(renewals.iter().map(|&u| u as f64)),
        renewal_exceed_prob: renewals.iter().filter(|&&u| u > u_max).count() as f64 / renewals.len().max(1) as f64,
        mean_probes: mean(eps.iter().map(|e| e.probes as f64)),
        mean_link_failures: mean(eps.iter().map(|e| e.link_failures as f64)),
    })
}

/// Everything one seed's experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub t_d: f64,
    pub runs: Vec<PolicyRun>,
    pub summaries: Vec<PolicySummary>,
}

/// Tune if needed, train the policies that need a table, and evaluate
/// every configured policy.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentOutcome> {
    let world = World::build(cfg)?;
    let t_d = resolve_t_d(&world, cfg)?;
    let reps = cfg.experiment.replications;
    let mut runs = Vec::new();
    let mut ours_table: Option<TrainedPolicy> = None;
    for &policy in &cfg.experiment.policies {
        let trained = if policy.needs_q_table() {
            if ours_table.is_none() {
                ours_table = Some(train(&world, cfg, PolicyKind::Ours, t_d)?.0);
            }
            ours_table.as_ref()
        } else {
            None
        };
        runs.push(evaluate(&world, cfg, policy, trained, t_d, reps)?);
    }
    let summaries = runs.iter().map(|r| summarize(r, cfg.skeleton.budget.u_max)).collect::<Result<_>>()?;
    Ok(ExperimentOutcome { t_d, runs, summaries })
}
