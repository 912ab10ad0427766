//! Metrics and summary CSV files.
//!
//! Floats are written in their shortest round-trip form, so parsing a row
//! and emitting it again is byte-identical.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::PolicyKind;
use super::experiment::{PolicyRun, PolicySummary};
use crate::error::Result;

pub const METRICS_HEADER: [&str; 6] =
    ["policy", "replication", "location_index", "rate_bps", "serving_bs", "handover_flag"];
pub const SUMMARY_HEADER: [&str; 4] = ["policy", "mean_Rtraj_bps", "std_Rtraj_bps", "mean_handovers"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: PolicyKind,
    pub replication: u64,
    pub location_index: usize,
    pub rate_bps: f64,
    pub serving_bs: usize,
    /// 0 or 1.
    pub handover_flag: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    #[serde(rename = "mean_Rtraj_bps")]
    pub mean_r_traj_bps: f64,
    #[serde(rename = "std_Rtraj_bps")]
    pub std_r_traj_bps: f64,
    pub mean_handovers: f64,
}

impl From<&PolicySummary> for SummaryRow {
    fn from(s: &PolicySummary) -> Self {
        SummaryRow {
            policy: s.policy,
            mean_r_traj_bps: s.mean_r_traj,
            std_r_traj_bps: s.std_r_traj,
            mean_handovers: s.mean_handovers,
        }
    }
}

pub fn metrics_rows(run: &PolicyRun) -> impl Iterator<Item = MetricsRow> + '_ {
    run.episodes.iter().enumerate().flat_map(move |(r, e)| {
        (0..e.rates.len()).map(move |i| MetricsRow {
            policy: run.policy,
            replication: r as u64,
            location_index: i,
            rate_bps: e.rates[i],
            serving_bs: e.serving[i],
            handover_flag: e.handover_flags[i] as u8,
        })
    })
}

fn write_rows<W: Write, T: Serialize>(out: W, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_metrics<W: Write>(out: W, rows: impl IntoIterator<Item = MetricsRow>) -> Result<()> {
    write_rows(out, &METRICS_HEADER, rows)
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    read_rows(input)
}

pub fn write_summary<W: Write>(out: W, rows: impl IntoIterator<Item = SummaryRow>) -> Result<()> {
    write_rows(out, &SUMMARY_HEADER, rows)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_rows(input)
}

/// Per-location profile: `policy,location_index,mean_rate_bps,std_rate_bps`.
pub fn write_profile<W: Write>(out: W, summaries: &[PolicySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "location_index", "mean_rate_bps", "std_rate_bps"])?;
    for s in summaries {
        for (i, (m, sd)) in s.rate_mean.iter().zip(&s.rate_std).enumerate() {
            w.write_record([s.policy.key().to_string(), i.to_string(), m.to_string(), sd.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Handover-count histogram: `policy,handovers,episodes`.
pub fn write_histogram<W: Write>(out: W, summaries: &[PolicySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "handovers", "episodes"])?;
    for s in summaries {
        for (k, n) in s.handover_histogram.iter().enumerate() {
            w.write_record([s.policy.key().to_string(), k.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emit_metrics(rows: &[MetricsRow]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_metrics(&mut buf, rows.iter().cloned()).unwrap();
        buf
    }

    #[test]
    fn header_matches_schema() {
        let buf = emit_metrics(&[]);
        assert_eq!(String::from_utf8(buf).unwrap(), "policy,replication,location_index,rate_bps,serving_bs,handover_flag\n");
        let mut buf = Vec::new();
        write_summary(&mut buf, [SummaryRow { policy: PolicyKind::SmartUcb, mean_r_traj_bps: 1.5e10, std_r_traj_bps: 0.0, mean_handovers: 2.5 }]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "policy,mean_Rtraj_bps,std_Rtraj_bps,mean_handovers\nsmart-ucb,15000000000.0,0.0,2.5\n"
        );
    }

    fn policy() -> impl Strategy<Value = PolicyKind> {
        prop::sample::select(PolicyKind::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn metrics_round_trip(rows in prop::collection::vec(
            (policy(), 0u64..1000, 0usize..100, 0.0f64..1e12, 0usize..20, 0u8..2)
                .prop_map(|(policy, replication, location_index, rate_bps, serving_bs, handover_flag)| MetricsRow {
                    policy, replication, location_index, rate_bps, serving_bs, handover_flag,
                }),
            0..20,
        )) {
            let text = emit_metrics(&rows);
            let parsed = read_metrics(&text[..]).unwrap();
            prop_assert_eq!(&parsed, &rows);
            prop_assert_eq!(emit_metrics(&parsed), text);
        }

        #[test]
        fn summary_round_trip(p in policy(), a in 0.0f64..1e12, b in 0.0f64..1e11, h in 0.0f64..50.0) {
            let rows = vec![SummaryRow { policy: p, mean_r_traj_bps: a, std_r_traj_bps: b, mean_handovers: h }];
            let mut text = Vec::new();
            write_summary(&mut text, rows.clone()).unwrap();
            let parsed = read_summary(&text[..]).unwrap();
            prop_assert_eq!(&parsed, &rows);
            let mut again = Vec::new();
            write_summary(&mut again, parsed).unwrap();
            prop_assert_eq!(again, text);
        }
    }
}
