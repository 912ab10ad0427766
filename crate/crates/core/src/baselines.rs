//! Reference policies: multi-connectivity handover, UCB1 backup selection,
//! and fixed-distance skeleton refresh.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::handover::HandoverConfig;

/// Decision of the multi-connectivity rule for one CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McDecision {
    pub next_serving: usize,
    /// No BS was acceptable.
    pub link_failure: bool,
}

/// Stay while the serving BS is acceptable, otherwise move to the best BS
/// (lowest index among equals).
pub fn multi_connectivity_step(levels: &[usize], serving: usize, cfg: &HandoverConfig) -> Result<McDecision> {
    let Some(&current) = levels.get(serving) else {
        return Err(Error::OutOfBounds(format!("serving BS {serving} of {}", levels.len())));
    };
    if cfg.acceptable(current) {
        return Ok(McDecision { next_serving: serving, link_failure: false });
    }
    let mut best = 0;
    for (j, &l) in levels.iter().enumerate() {
        if l > levels[best] {
            best = j;
        }
    }
    Ok(McDecision { next_serving: best, link_failure: !cfg.acceptable(levels[best]) })
}

/// Visit counts and running means per `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbStats {
    n_actions: usize,
    counts: Vec<u64>,
    means: Vec<f64>,
    totals: Vec<u64>,
}

impl UcbStats {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        UcbStats {
            n_actions,
            counts: vec![0; n_states * n_actions],
            means: vec![0.0; n_states * n_actions],
            totals: vec![0; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.totals.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.totals.len() || a >= self.n_actions {
            return Err(Error::OutOfBounds(format!("({s}, {a}) in {}x{} UCB stats", self.totals.len(), self.n_actions)));
        }
        Ok(())
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    pub fn mean(&self, s: usize, a: usize) -> f64 {
        self.means[s * self.n_actions + a]
    }

    /// Number of pulls recorded in state `s`.
    pub fn steps(&self, s: usize) -> u64 {
        self.totals[s]
    }

    pub fn update(&mut self, s: usize, a: usize, reward: f64) -> Result<()> {
        self.check(s, a)?;
        let i = s * self.n_actions + a;
        self.counts[i] += 1;
        self.means[i] += (reward - self.means[i]) / self.counts[i] as f64;
        self.totals[s] += 1;
        Ok(())
    }
}

/// UCB1 choice in state `s`: untried actions first in index order, then the
/// largest `mean + c·√(2 ln t / n)`. `excluded` is never chosen unless it is
/// the only action.
pub fn ucb_select(stats: &UcbStats, s: usize, c: f64, excluded: Option<usize>) -> Result<usize> {
    stats.check(s, 0)?;
    let na = stats.n_actions;
    let allowed = |a: usize| na == 1 || Some(a) != excluded;
    if let Some(a) = (0..na).find(|&a| allowed(a) && stats.count(s, a) == 0) {
        return Ok(a);
    }
    let ln_t = (stats.steps(s).max(1) as f64).ln();
    let mut best: Option<(usize, f64)> = None;
    for a in (0..na).filter(|&a| allowed(a)) {
        let v = stats.mean(s, a) + c * (2.0 * ln_t / stats.count(s, a) as f64).sqrt();
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    Ok(best.map_or(0, |(a, _)| a))
}

/// Refresh the reference skeleton every `refresh_distance` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdPolicy {
    pub refresh_distance: f64,
}

impl Default for EdPolicy {
    fn default() -> Self {
        EdPolicy { refresh_distance: 10.0 }
    }
}

impl EdPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.refresh_distance > 0.0) {
            return invalid(format!("refresh distance must be positive, got {}", self.refresh_distance));
        }
        Ok(())
    }
}

pub fn ed_should_refresh(distance_since_refresh: f64, policy: &EdPolicy) -> bool {
    distance_since_refresh >= policy.refresh_distance
}
