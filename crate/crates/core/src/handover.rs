//! SNR quantization, the per-UE SNR log, and the DM2 handover rule.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Quantization levels and the handover trigger.
///
/// Levels are 1-based. A BS is acceptable when its level is strictly above
/// `t_ho_level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoverConfig {
    /// Strictly increasing level boundaries in dB; `L = len + 1`.
    pub boundaries_db: Vec<f64>,
    pub t_ho_level: usize,
    /// Consecutive CIs the serving BS must sit at or below `t_ho_level`
    /// before a handover fires.
    pub trigger_window: u32,
    /// Ignore log entries older than this many CIs in the fallback search.
    pub max_log_age: Option<u64>,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        HandoverConfig { boundaries_db: vec![40.0], t_ho_level: 1, trigger_window: 1, max_log_age: None }
    }
}

impl HandoverConfig {
    /// Two levels split at `t_ho_db`.
    pub fn two_level(t_ho_db: f64) -> Self {
        HandoverConfig { boundaries_db: vec![t_ho_db], ..Default::default() }
    }

    /// `levels` uniform bins over `[snr_min_db, snr_max_db]`, with the
    /// threshold level chosen so that `t_ho_db` falls in the first
    /// acceptable level.
    pub fn uniform(levels: usize, snr_min_db: f64, snr_max_db: f64, t_ho_db: f64) -> Result<Self> {
        if levels < 2 || !(snr_max_db > snr_min_db) {
            return invalid(format!("need at least 2 levels over a non-empty range, got {levels} over [{snr_min_db}, {snr_max_db}]"));
        }
        let step = (snr_max_db - snr_min_db) / levels as f64;
        let boundaries_db: Vec<f64> = (1..levels).map(|k| snr_min_db + step * k as f64).collect();
        let mut cfg = HandoverConfig { boundaries_db, ..Default::default() };
        cfg.t_ho_level = quantize_snr(t_ho_db, &cfg).saturating_sub(1).max(1);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn levels(&self) -> usize {
        self.boundaries_db.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries_db.iter().any(|b| !b.is_finite()) {
            return invalid("level boundaries must be finite");
        }
        if self.boundaries_db.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("level boundaries must be strictly increasing");
        }
        if self.t_ho_level == 0 || self.t_ho_level >= self.levels() {
            return invalid(format!("T_HO level {} outside 1..{}", self.t_ho_level, self.levels()));
        }
        if self.trigger_window == 0 {
            return invalid("trigger window must be at least one CI");
        }
        Ok(())
    }

    pub fn acceptable(&self, level: usize) -> bool {
        level > self.t_ho_level
    }
}

/// Level of `snr_db`: one plus the number of boundaries at or below it.
pub fn quantize_snr(snr_db: f64, cfg: &HandoverConfig) -> usize {
    1 + cfg.boundaries_db.iter().filter(|&&b| snr_db >= b).count()
}

/// One CI of Algorithm-1 bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub ci: u64,
    pub location: usize,
    pub serving: usize,
    pub backup: usize,
    pub serving_level: usize,
    pub backup_level: usize,
    pub next_serving: usize,
    pub handover: bool,
    /// No BS in the log was acceptable.
    pub link_failure: bool,
}

/// Last quantized level and its age for every BS, plus the trigger counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrLogTable {
    levels: Vec<Option<usize>>,
    /// `None` stands for an entry that was never probed (infinite age).
    ages: Vec<Option<u64>>,
    below: u32,
    ci: u64,
}

impl SnrLogTable {
    pub fn new(n_bs: usize) -> Self {
        SnrLogTable { levels: vec![None; n_bs], ages: vec![None; n_bs], below: 0, ci: 0 }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, bs: usize) -> Option<usize> {
        self.levels.get(bs).copied().flatten()
    }

    pub fn age(&self, bs: usize) -> Option<u64> {
        self.ages.get(bs).copied().flatten()
    }

    pub fn ci(&self) -> u64 {
        self.ci
    }

    fn check(&self, bs: usize) -> Result<()> {
        if bs >= self.len() {
            return Err(Error::OutOfBounds(format!("BS {bs} of {}", self.len())));
        }
        Ok(())
    }

    /// Store a fresh measurement.
    pub fn record(&mut self, bs: usize, level: usize) -> Result<()> {
        self.check(bs)?;
        self.levels[bs] = Some(level);
        self.ages[bs] = Some(0);
        Ok(())
    }

    /// Age every probed entry by one CI.
    pub fn tick(&mut self) {
        for a in self.ages.iter_mut().flatten() {
            *a += 1;
        }
        self.ci += 1;
    }

    fn usable(&self, bs: usize, cfg: &HandoverConfig) -> Option<(usize, u64)> {
        let (l, a) = (self.levels[bs]?, self.ages[bs]?);
        match cfg.max_log_age {
            Some(m) if a > m => None,
            _ => Some((l, a)),
        }
    }

    /// Freshest acceptable BS in the log; ties go to the lowest index.
    pub fn freshest_acceptable(&self, cfg: &HandoverConfig) -> Option<usize> {
        (0..self.len())
            .filter_map(|j| self.usable(j, cfg).filter(|(l, _)| cfg.acceptable(*l)).map(|(_, a)| (a, j)))
            .min()
            .map(|(_, j)| j)
    }

    /// Best logged level, then freshest, then lowest index.
    pub fn best_logged(&self, cfg: &HandoverConfig) -> Option<usize> {
        (0..self.len())
            .filter_map(|j| self.usable(j, cfg).map(|(l, a)| (std::cmp::Reverse(l), a, j)))
            .min()
            .map(|(_, _, j)| j)
    }

    /// Probe serving and backup, apply the handover rule, then age the log.
    ///
    /// `probe` returns the quantized level of a BS at the current location.
    pub fn step_ci<F>(
        &mut self,
        location: usize,
        serving: usize,
        backup: usize,
        cfg: &HandoverConfig,
        mut probe: F,
    ) -> Result<CiRecord>
    where
        F: FnMut(usize) -> Result<usize>,
    {
        self.check(serving)?;
        self.check(backup)?;
        let serving_level = probe(serving)?;
        self.record(serving, serving_level)?;
        let backup_level = if backup == serving { serving_level } else { probe(backup)? };
        self.record(backup, backup_level)?;

        let mut next = serving;
        let mut link_failure = false;
        if cfg.acceptable(serving_level) {
            self.below = 0;
        } else {
            self.below += 1;
            if self.below >= cfg.trigger_window {
                if backup != serving && cfg.acceptable(backup_level) {
                    next = backup;
                } else if let Some(j) = self.freshest_acceptable(cfg) {
                    next = j;
                } else {
                    link_failure = true;
                    next = self.best_logged(cfg).unwrap_or(serving);
                }
                if next != serving {
                    self.below = 0;
                }
            }
        }
        let rec = CiRecord {
            ci: self.ci,
            location,
            serving,
            backup,
            serving_level,
            backup_level,
            next_serving: next,
            handover: next != serving,
            link_failure,
        };
        self.tick();
        Ok(rec)
    }
}

pub fn write_records<W: Write>(out: W, records: &[CiRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<CiRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}
