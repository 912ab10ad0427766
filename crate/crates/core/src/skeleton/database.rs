use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PathSkeleton;
use crate::environment::Point;
use crate::error::{invalid, Error, Result};

/// Identifier of a square grid cell.
pub type GridId = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryOutcome {
    Hit,
    Rebuilt,
}

/// Per-BS store of reference skeletons keyed by grid cell.
///
/// Live entries sit in the normal list with an aging counter; once the
/// counter passes the aging threshold the cell moves to the watch list and
/// the next query for it rebuilds the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonDatabase {
    grid_size: f64,
    aging_threshold: u32,
    normal: BTreeMap<GridId, (PathSkeleton, u32)>,
    watch: BTreeSet<GridId>,
    rebuilds: u64,
}

impl SkeletonDatabase {
    pub fn new(grid_size: f64, aging_threshold: u32) -> Result<Self> {
        if !(grid_size > 0.0) || !grid_size.is_finite() {
            return invalid(format!("grid size must be positive, got {grid_size}"));
        }
        Ok(SkeletonDatabase {
            grid_size,
            aging_threshold,
            normal: BTreeMap::new(),
            watch: BTreeSet::new(),
            rebuilds: 0,
        })
    }

    pub fn grid_size(&self) -> f64 {
        self.grid_size
    }

    pub fn aging_threshold(&self) -> u32 {
        self.aging_threshold
    }

    /// Cell containing `p`.
    pub fn grid_id(&self, p: &Point) -> GridId {
        let ix = (p.x / self.grid_size).floor() as i64;
        let iy = (p.y / self.grid_size).floor() as i64;
        (ix << 32) ^ (iy & 0xffff_ffff)
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    pub fn normal_len(&self) -> usize {
        self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty() && self.watch.is_empty()
    }

    pub fn in_watch(&self, grid: GridId) -> bool {
        self.watch.contains(&grid)
    }

    pub fn aging_counter(&self, grid: GridId) -> Option<u32> {
        self.normal.get(&grid).map(|(_, c)| *c)
    }

    pub fn get(&self, grid: GridId) -> Option<&PathSkeleton> {
        self.normal.get(&grid).map(|(s, _)| s)
    }

    /// Advance every aging counter by one CI and retire stale entries.
    pub fn tick(&mut self) {
        let limit = self.aging_threshold;
        let mut expired = Vec::new();
        for (g, (_, c)) in self.normal.iter_mut() {
            *c += 1;
            if *c > limit {
                expired.push(*g);
            }
        }
        for g in expired {
            self.normal.remove(&g);
            self.watch.insert(g);
        }
    }

    /// Fetch the skeleton of `grid`, rebuilding it on a miss or a watched cell.
    ///
    /// A failing `rebuild` leaves the database untouched and reports
    /// [`Error::SkeletonUnavailable`].
    pub fn query<F>(&mut self, grid: GridId, rebuild: F) -> Result<(PathSkeleton, QueryOutcome)>
    where
        F: FnOnce() -> Option<PathSkeleton>,
    {
        if let Some((s, _)) = self.normal.get(&grid) {
            return Ok((s.clone(), QueryOutcome::Hit));
        }
        let s = rebuild().ok_or(Error::SkeletonUnavailable(grid))?;
        self.watch.remove(&grid);
        self.normal.insert(grid, (s.clone(), 0));
        self.rebuilds += 1;
        Ok((s, QueryOutcome::Rebuilt))
    }

    /// Move `grid` to the watch list so the next query rebuilds it.
    pub fn invalidate(&mut self, grid: GridId) {
        if self.normal.remove(&grid).is_some() {
            self.watch.insert(grid);
        }
    }

    pub fn snapshot(&self) -> DatabaseSnapshot {
        DatabaseSnapshot {
            grid_size: self.grid_size,
            aging_threshold: self.aging_threshold,
            normal: self
                .normal
                .iter()
                .map(|(g, (s, c))| SnapshotEntry { grid_id: *g, aging_counter: *c, skeleton: s.clone() })
                .collect(),
            watch: self.watch.iter().copied().collect(),
        }
    }

    pub fn from_snapshot(snap: DatabaseSnapshot) -> Result<Self> {
        let mut db = SkeletonDatabase::new(snap.grid_size, snap.aging_threshold)?;
        for e in snap.normal {
            if e.aging_counter > snap.aging_threshold {
                return Err(Error::Format(format!("entry {} is older than the aging threshold", e.grid_id)));
            }
            db.normal.insert(e.grid_id, (e.skeleton, e.aging_counter));
        }
        for g in snap.watch {
            if db.normal.contains_key(&g) {
                return Err(Error::Format(format!("grid {g} is in both lists")));
            }
            db.watch.insert(g);
        }
        Ok(db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub grid_id: GridId,
    pub aging_counter: u32,
    pub skeleton: PathSkeleton,
}

/// Serializable view of a [`SkeletonDatabase`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSnapshot {
    pub grid_size: f64,
    pub aging_threshold: u32,
    pub normal: Vec<SnapshotEntry>,
    pub watch: Vec<GridId>,
}

/// Ask `ues` UEs, once per slot for `slots` slots, to measure a skeleton;
/// each accepts independently with probability `p`. Returns the first
/// `(slot, ue)` that accepts.
pub fn find_volunteer<R: Rng + ?Sized>(p: f64, ues: u32, slots: u32, rng: &mut R) -> Option<(u32, u32)> {
    for slot in 0..slots {
        for ue in 0..ues {
            if rng.random_bool(p.clamp(0.0, 1.0)) {
                return Some((slot, ue));
            }
        }
    }
    None
}

/// Probability that nobody accepts: `(1 − p)^(ues · slots)`.
pub fn zero_acceptance_probability(p: f64, ues: u32, slots: u32) -> f64 {
    (1.0 - p).powi((ues * slots) as i32)
}
