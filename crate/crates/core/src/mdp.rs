//! Small explicit MDPs: value iteration and an episodic wrapper for Q-learning.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::learning::{EpisodicEnv, Transition};
use crate::rng::SimRng;

/// Finite MDP with tabulated transitions and expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `(next, probability)` lists, indexed by `s * n_actions + a`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Reward of `(s, a)`, same indexing.
    pub rewards: Vec<f64>,
}

impl FiniteMdp {
    pub fn deterministic(n_states: usize, n_actions: usize, next: &[usize], rewards: &[f64]) -> Result<Self> {
        FiniteMdp {
            n_states,
            n_actions,
            transitions: next.iter().map(|&n| vec![(n, 1.0)]).collect(),
            rewards: rewards.to_vec(),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let n = self.n_states * self.n_actions;
        if n == 0 || self.transitions.len() != n || self.rewards.len() != n {
            return Err(Error::Shape("transition or reward table size".into()));
        }
        for row in &self.transitions {
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            if row.iter().any(|&(s, p)| s >= self.n_states || p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return invalid("transition rows must be distributions over valid states");
            }
        }
        Ok(self)
    }
}

/// Iterate the Bellman optimality operator until successive sweeps differ by
/// less than `tol` in sup norm. Returns `Q*` row-major.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) || !(tol > 0.0) {
        return invalid(format!("gamma {gamma} or tolerance {tol} out of range"));
    }
    let na = mdp.n_actions;
    let mut q = vec![0.0; mdp.n_states * na];
    for _ in 0..max_sweeps {
        let v: Vec<f64> = q.chunks(na).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let mut delta = 0.0f64;
        for (i, qi) in q.iter_mut().enumerate() {
            let next = mdp.rewards[i] + gamma * mdp.transitions[i].iter().map(|&(s, p)| p * v[s]).sum::<f64>();
            delta = delta.max((next - *qi).abs());
            *qi = next;
        }
        if !delta.is_finite() {
            break;
        }
        if delta < tol {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence(max_sweeps))
}

/// Runs a [`FiniteMdp`] in fixed-length episodes from a fixed start state.
/// Episodes are truncated, not terminal, so the learned values are the
/// infinite-horizon ones.
pub struct MdpEnv {
    pub mdp: FiniteMdp,
    pub start: usize,
    pub horizon: usize,
    state: usize,
    steps: usize,
    rng: SimRng,
}

impl MdpEnv {
    pub fn new(mdp: FiniteMdp, start: usize, horizon: usize, rng: SimRng) -> Self {
        MdpEnv { mdp, start, horizon, state: start, steps: 0, rng }
    }
}

impl EpisodicEnv for MdpEnv {
    fn n_states(&self) -> usize {
        self.mdp.n_states
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions
    }

    fn reset(&mut self, _episode: u64) -> Result<usize> {
        self.state = self.start;
        self.steps = 0;
        Ok(self.state)
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let i = self.state * self.mdp.n_actions + action;
        let row = &self.mdp.transitions[i];
        let mut u: f64 = self.rng.random();
        let mut next = row.last().map_or(self.state, |x| x.0);
        for &(s, p) in row {
            if u < p {
                next = s;
                break;
            }
            u -= p;
        }
        self.state = next;
        self.steps += 1;
        Ok(Transition { reward: self.mdp.rewards[i], next: Some(next), truncated: self.steps >= self.horizon })
    }
}
