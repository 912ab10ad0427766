use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Constraint on skeleton renewals: `Pr{U > u_max} ≤ delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdPolicy {
    pub u_max: u32,
    pub delta: f64,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy { u_max: 10, delta: 0.2 }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return invalid(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        Ok(())
    }
}

/// What an evaluator reports for one candidate `T_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEval {
    pub mean_rate: f64,
    pub exceed_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub t_d: f64,
    pub objective: f64,
    pub exceed_prob: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]` down to an interval of
/// width `tol`.
///
/// `f` may return `-inf`. Equal values move the bracket to the right, so a
/// feasible region that opens up toward `hi` is still found when the left
/// probe is infeasible. Returns the best point probed, including the final
/// midpoint, with its value and the number of calls.
pub fn golden_section_max<F>(lo: f64, hi: f64, tol: f64, mut f: F) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= hi) || !(tol > 0.0) {
        return invalid(format!("bad bracket [{lo}, {hi}] with tolerance {tol}"));
    }
    let (mut a, mut b) = (lo, hi);
    let mut calls = 0;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut eval = |x: f64, best: &mut (f64, f64)| -> Result<f64> {
        calls += 1;
        let v = f(x)?;
        if v > best.1 || best.0.is_nan() || (v == best.1 && x > best.0) {
            *best = (x, v);
        }
        Ok(v)
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut best)?;
    let mut fd = eval(d, &mut best)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut best)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut best)?;
        }
    }
    eval(0.5 * (a + b), &mut best)?;
    Ok((best.0, best.1, calls))
}

/// Choose `T_D` in `[0, hi]` that maximizes mean rate subject to the renewal
/// budget. Infeasible candidates score `-inf`.
pub fn optimize_threshold<F>(hi: f64, policy: ThresholdPolicy, mut evaluate: F) -> Result<ThresholdOutcome>
where
    F: FnMut(f64) -> Result<ThresholdEval>,
{
    policy.validate()?;
    if !(hi >= 0.0) || !hi.is_finite() {
        return invalid(format!("upper bracket must be finite and non-negative, got {hi}"));
    }
    let tol = if hi > 0.0 { 1e-3 * hi } else { 1.0 };
    let mut probes: Vec<(f64, ThresholdEval)> = Vec::new();
    let (t_d, objective, evaluations) = golden_section_max(0.0, hi, tol, |t| {
        let e = evaluate(t)?;
        probes.push((t, e));
        Ok(if e.exceed_prob > policy.delta { f64::NEG_INFINITY } else { e.mean_rate })
    })?;
    if objective == f64::NEG_INFINITY {
        return Err(Error::Infeasible);
    }
    let exceed_prob = probes.iter().find(|(t, _)| *t == t_d).map_or(f64::NAN, |(_, e)| e.exceed_prob);
    Ok(ThresholdOutcome { t_d, objective, exceed_prob, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unimodal_surrogate() {
        let (x, v, _) = golden_section_max(0.0, 10.0, 1e-5, |x| Ok(-(x - 3.0) * (x - 3.0))).unwrap();
        assert!((x - 3.0).abs() < 1e-4);
        assert!(v <= 0.0);
    }

    #[test]
    fn infeasible_everywhere() {
        let p = ThresholdPolicy { u_max: 10, delta: 0.0 };
        let r = optimize_threshold(5.0, p, |_| Ok(ThresholdEval { mean_rate: 1.0, exceed_prob: 0.3 }));
        assert!(matches!(r, Err(Error::Infeasible)));
    }

    #[test]
    fn feasible_region_on_the_right() {
        // Rate falls with T_D, but small thresholds renew too often.
        let p = ThresholdPolicy::default();
        let out = optimize_threshold(10.0, p, |t| {
            Ok(ThresholdEval { mean_rate: 10.0 - t, exceed_prob: if t < 4.0 { 0.5 } else { 0.1 } })
        })
        .unwrap();
        assert!(out.t_d >= 4.0 && out.t_d < 4.02, "{out:?}");
        assert!(out.exceed_prob <= 0.2);
    }

    #[test]
    fn degenerate_bracket() {
        let out = optimize_threshold(0.0, ThresholdPolicy::default(), |_| {
            Ok(ThresholdEval { mean_rate: 2.0, exceed_prob: 0.0 })
        })
        .unwrap();
        assert_eq!(out.t_d, 0.0);
        assert!(golden_section_max(1.0, 0.0, 1e-3, |_| Ok(0.0)).is_err());
    }
}
