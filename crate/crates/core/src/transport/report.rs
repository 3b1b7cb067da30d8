use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::Result;

/// One line of a distance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub p: f64,
    pub metric: String,
    pub value: f64,
    /// `exact` or `sinkhorn_lower` / `sinkhorn_upper`.
    pub method: String,
    pub certificate_gap: f64,
}

pub fn write_distance_rows<W: Write>(rows: &[DistanceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
