use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One path of an externally produced channel trace. Angles in radians,
/// `gain_db` is the path's power gain including pathloss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub realization: u32,
    pub bs: u32,
    pub location: u32,
    pub theta_bs: f64,
    pub phi_bs: f64,
    pub theta_ue: f64,
    pub phi_ue: f64,
    pub gain_db: f64,
    pub los: u8,
}

/// Paths grouped by `(realization, bs, location)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSet {
    pub realizations: usize,
    pub n_bs: usize,
    pub n_locations: usize,
    paths: BTreeMap<(u32, u32, u32), Vec<TraceRow>>,
}

impl TraceSet {
    pub fn from_rows(rows: Vec<TraceRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Format("channel trace has no rows".into()));
        }
        let mut set = TraceSet::default();
        for r in rows {
            if !(r.gain_db.is_finite() && r.theta_bs.is_finite() && r.phi_bs.is_finite()
                && r.theta_ue.is_finite() && r.phi_ue.is_finite())
            {
                return Err(Error::Format(format!("non-finite value in trace row {r:?}")));
            }
            set.realizations = set.realizations.max(r.realization as usize + 1);
            set.n_bs = set.n_bs.max(r.bs as usize + 1);
            set.n_locations = set.n_locations.max(r.location as usize + 1);
            set.paths.entry((r.realization, r.bs, r.location)).or_default().push(r);
        }
        Ok(set)
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        TraceSet::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        TraceSet::read(std::fs::File::open(path)?)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rows in self.paths.values() {
            for r in rows {
                w.serialize(r)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Paths of one link; empty when the link is fully blocked.
    pub fn link(&self, realization: usize, bs: usize, location: usize) -> &[TraceRow] {
        self.paths
            .get(&(realization as u32, bs as u32, location as u32))
            .map_or(&[], |v| v.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_group() {
        let text = "realization,bs,location,theta_bs,phi_bs,theta_ue,phi_ue,gain_db,los\n\
                    0,0,0,0.1,0.0,-0.2,0.0,-90.5,1\n\
                    0,0,0,0.7,0.1,1.2,0.0,-101,0\n\
                    0,1,2,0.3,0.0,0.2,0.0,-95,0\n\
                    1,0,1,0.0,0.0,0.0,0.0,-99,1\n";
        let t = TraceSet::read(text.as_bytes()).unwrap();
        assert_eq!((t.realizations, t.n_bs, t.n_locations), (2, 2, 3));
        assert_eq!(t.link(0, 0, 0).len(), 2);
        assert!(t.link(0, 1, 0).is_empty());
        let mut out = Vec::new();
        t.write(&mut out).unwrap();
        assert_eq!(TraceSet::read(out.as_slice()).unwrap(), t);
    }

    #[test]
    fn rejects_garbage() {
        assert!(TraceSet::read("realization,bs\n".as_bytes()).is_err());
        assert!(TraceSet::read("realization,bs,location,theta_bs,phi_bs,theta_ue,phi_ue,gain_db,los\n0,0,0,x,0,0,0,0,0\n".as_bytes()).is_err());
    }
}
