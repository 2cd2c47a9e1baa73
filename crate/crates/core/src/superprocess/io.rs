use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::measure::MeasureState;

/// One JSONL line per snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub replicate: usize,
    pub time: f64,
    pub count: usize,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
}

impl SnapshotRecord {
    pub fn new(replicate: usize, s: &MeasureState, with_positions: bool) -> Self {
        Self {
            replicate,
            time: s.time,
            count: s.count(),
            mass: s.total_mass(),
            positions: with_positions.then(|| s.positions.clone()),
        }
    }
}

pub fn write_snapshots<W: Write>(
    mut w: W,
    replicate: usize,
    snapshots: &[MeasureState],
    with_positions: bool,
) -> Result<()> {
    for s in snapshots {
        serde_json::to_writer(&mut w, &SnapshotRecord::new(replicate, s, with_positions))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_snapshots<R: BufRead>(r: R) -> Result<Vec<SnapshotRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
