use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-component power extrapolated from a reference two-layer `d = 4`
/// network: recurrent cells scale with `d`, mirror banks with `d^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// nW per state dimension for the two-layer network.
    pub c_bmru: f64,
    /// nW per `d^2` for the two-layer network.
    pub c_fc: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            c_bmru: 10.0,
            c_fc: 1.875,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub d: usize,
    pub p_bmru_nw: f64,
    pub p_fc_nw: f64,
    pub share_bmru: f64,
    pub share_fc: f64,
}

impl PowerModel {
    pub fn report(&self, d: usize, n_layers: usize) -> Result<PowerRow> {
        if d == 0 || n_layers == 0 {
            return Err(Error::Config("d and n_layers must be at least 1".into()));
        }
        let scale = n_layers as f64 / 2.0;
        let p_bmru = self.c_bmru * d as f64 * scale;
        let p_fc = self.c_fc * (d * d) as f64 * scale;
        let total = p_bmru + p_fc;
        Ok(PowerRow {
            d,
            p_bmru_nw: p_bmru,
            p_fc_nw: p_fc,
            share_bmru: p_bmru / total,
            share_fc: p_fc / total,
        })
    }
}

pub fn power_report(d: usize, n_layers: usize) -> Result<PowerRow> {
    PowerModel::default().report(d, n_layers)
}

pub fn write_power_csv<W: Write>(rows: &[PowerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "p_bmru_nW", "p_fc_nW", "share_bmru", "share_fc"])?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.p_bmru_nw.to_string(),
            r.p_fc_nw.to_string(),
            r.share_bmru.to_string(),
            r.share_fc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
