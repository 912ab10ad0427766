//! Tabular ε-greedy Q-learning over (location, serving BS, SNR level) states.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `(location, serving BS, level)` with a 1-based level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RlState {
    pub location: usize,
    pub serving: usize,
    pub level: usize,
}

/// Dimensions `M × N × L` of the state space; actions range over the `N` BSs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub locations: usize,
    pub bss: usize,
    pub levels: usize,
}

impl StateSpace {
    pub fn new(locations: usize, bss: usize, levels: usize) -> Result<Self> {
        if locations == 0 || bss == 0 || levels == 0 {
            return invalid(format!("empty state space {locations}x{bss}x{levels}"));
        }
        Ok(StateSpace { locations, bss, levels })
    }

    pub fn len(&self) -> usize {
        self.locations * self.bss * self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, s: RlState) -> Result<usize> {
        if s.location >= self.locations || s.serving >= self.bss || s.level == 0 || s.level > self.levels {
            return Err(Error::OutOfBounds(format!("state {s:?} outside {self:?}")));
        }
        Ok((s.location * self.bss + s.serving) * self.levels + s.level - 1)
    }

    pub fn state(&self, idx: usize) -> RlState {
        let level = idx % self.levels + 1;
        let rest = idx / self.levels;
        RlState { location: rest / self.bss, serving: rest % self.bss, level }
    }
}

/// Row-major action values, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn for_space(space: &StateSpace) -> Self {
        QTable::zeros(space.len(), space.bss)
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Shape(format!("{} values for a {n_states}x{n_actions} table", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite action value".into()));
        }
        Ok(QTable { n_states, n_actions, values })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::OutOfBounds(format!("({s}, {a}) in a {}x{} table", self.n_states, self.n_actions)));
        }
        Ok(())
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        self.check(s, a)?;
        Ok(self.values[s * self.n_actions + a])
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) -> Result<()> {
        self.check(s, a)?;
        self.values[s * self.n_actions + a] = v;
        Ok(())
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First action with the largest value, skipping `excluded`.
    pub fn argmax(&self, s: usize, excluded: Option<usize>) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (a, &v) in self.row(s).iter().enumerate() {
            if Some(a) == excluded && self.n_actions > 1 {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map_or(0, |(a, _)| a)
    }
}

/// `Q(s,a) += α [r + γ max_a' Q(s',a') − Q(s,a)]`; a terminal `next` of
/// `None` bootstraps from zero.
pub fn q_update(q: &mut QTable, s: usize, a: usize, r: f64, next: Option<usize>, alpha: f64, gamma: f64) -> Result<()> {
    q.check(s, a)?;
    let boot = match next {
        Some(n) => {
            q.check(n, 0)?;
            q.max(n)
        }
        None => 0.0,
    };
    let i = s * q.n_actions + a;
    q.values[i] += alpha * (r + gamma * boot - q.values[i]);
    Ok(())
}

/// ε-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    select_action_masked(q, s, epsilon, None, rng)
}

/// ε-greedy choice that never returns `excluded` (unless it is the only action).
pub fn select_action_masked<R: Rng + ?Sized>(
    q: &QTable,
    s: usize,
    epsilon: f64,
    excluded: Option<usize>,
    rng: &mut R,
) -> usize {
    if epsilon > 0.0 && rng.random_bool(epsilon.min(1.0)) {
        match excluded.filter(|&e| e < q.n_actions && q.n_actions > 1) {
            Some(e) => {
                let a = rng.random_range(0..q.n_actions - 1);
                if a >= e {
                    a + 1
                } else {
                    a
                }
            }
            None => rng.random_range(0..q.n_actions),
        }
    } else {
        q.argmax(s, excluded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: u64,
    /// Multiplies raw rewards before the update (bps → Gbps by default).
    pub reward_scale: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig { alpha: 0.1, gamma: 0.99, epsilon: 0.01, episodes: 200_000, reward_scale: 1e-9 }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return invalid(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(self.reward_scale > 0.0) || !self.reward_scale.is_finite() {
            return invalid("reward scale must be positive");
        }
        Ok(())
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    /// `None` when the episode has reached its terminal location.
    pub next: Option<usize>,
    /// Cut the episode here while still bootstrapping from `next`.
    pub truncated: bool,
}

/// An episodic environment over a finite state set.
pub trait EpisodicEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Start episode `episode` and return its first state.
    fn reset(&mut self, episode: u64) -> Result<usize>;
    /// Action that must not be taken in the current state, if any.
    fn excluded_action(&self) -> Option<usize> {
        None
    }
    fn step(&mut self, action: usize) -> Result<Transition>;
}

/// Run Q-learning for `cfg.episodes` episodes; returns each episode's
/// undiscounted raw return.
pub fn train<E: EpisodicEnv, R: Rng + ?Sized>(
    env: &mut E,
    q: &mut QTable,
    cfg: &LearningConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if q.n_states != env.n_states() || q.n_actions != env.n_actions() {
        return Err(Error::Shape("Q table does not match the environment".into()));
    }
    let mut returns = Vec::with_capacity(cfg.episodes as usize);
    for ep in 0..cfg.episodes {
        let mut s = env.reset(ep)?;
        let mut rewards = Vec::new();
        loop {
            let a = select_action_masked(q, s, cfg.epsilon, env.excluded_action(), rng);
            let t = env.step(a)?;
            rewards.push(t.reward);
            q_update(q, s, a, t.reward * cfg.reward_scale, t.next, cfg.alpha, cfg.gamma)?;
            match t.next {
                Some(n) if !t.truncated => s = n,
                _ => break,
            }
        }
        returns.push(trajectory_return(&rewards));
    }
    Ok(returns)
}

/// Undiscounted sum of per-location rewards.
pub fn trajectory_return(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

/// Greedy action per state, never picking the serving BS as its own backup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub space: StateSpace,
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn greedy(q: &QTable, space: StateSpace) -> Result<Self> {
        if q.n_states != space.len() || q.n_actions != space.bss {
            return Err(Error::Shape("Q table does not match the state space".into()));
        }
        let actions = (0..space.len()).map(|i| q.argmax(i, Some(space.state(i).serving))).collect();
        Ok(Policy { space, actions })
    }

    pub fn action(&self, s: RlState) -> Result<usize> {
        Ok(self.actions[self.space.index(s)?])
    }
}

const MAGIC: &[u8; 4] = b"MWQT";
const VERSION: u32 = 1;

/// Write a Q table and its state space: magic, version, `M N L A`, then the
/// values row-major, all little-endian.
pub fn write_qtable<W: Write>(mut out: W, space: &StateSpace, q: &QTable) -> Result<()> {
    if q.n_states != space.len() {
        return Err(Error::Shape("Q table does not match the state space".into()));
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for d in [space.locations, space.bss, space.levels, q.n_actions] {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in &q.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_qtable<R: Read>(mut input: R) -> Result<(StateSpace, QTable)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a Q-table file".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported Q-table version {version}")));
    }
    let mut dims = [0usize; 4];
    let mut b8 = [0u8; 8];
    for d in dims.iter_mut() {
        input.read_exact(&mut b8)?;
        *d = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("dimension overflow".into()))?;
    }
    let space = StateSpace::new(dims[0], dims[1], dims[2]).map_err(|e| Error::Format(e.to_string()))?;
    if dims[3] != space.bss {
        return Err(Error::Format("action count differs from BS count".into()));
    }
    let n = space.len().checked_mul(dims[3]).ok_or_else(|| Error::Format("table too large".into()))?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    if input.read(&mut b8)? != 0 {
        return Err(Error::Format("trailing bytes after Q table".into()));
    }
    let q = QTable::from_values(space.len(), dims[3], values)?;
    Ok((space, q))
}
