use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of a KCL node a mirror feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Sources current into the node.
    Pos,
    /// Sinks current from the node.
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    pub ratio: f64,
    pub branch: Branch,
}

impl MirrorSpec {
    pub fn for_weight(w: f64) -> Self {
        Self {
            ratio: w.abs(),
            branch: if w < 0.0 { Branch::Neg } else { Branch::Pos },
        }
    }

    pub fn signed_ratio(&self) -> f64 {
        match self.branch {
            Branch::Pos => self.ratio,
            Branch::Neg => -self.ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MirrorMode {
    Ideal,
    Calibrated,
}

/// Relative gain error of the built-in table: -5.25% at 10 pA rising
/// linearly in log current to -2.8% at 10 nA, flat outside.
pub fn synthetic_relative_error(input_pa: f64) -> f64 {
    let x = ((input_pa.max(1e-12).log10() - 1.0) / 3.0).clamp(0.0, 1.0);
    -0.0525 + (0.0525 - 0.028) * x
}

/// Effective mirror ratio on a (target ratio, input current) grid,
/// interpolated bilinearly in log-log coordinates and held flat outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub ratios: Vec<f64>,
    pub inputs_pa: Vec<f64>,
    /// `effective[r][i]` for `ratios[r]`, `inputs_pa[i]`.
    pub effective: Vec<Vec<f64>>,
}

fn bracket(axis: &[f64], v: f64) -> (usize, usize, f64) {
    let lv = v.ln();
    if axis.len() == 1 || lv <= axis[0].ln() {
        return (0, 0, 0.0);
    }
    let last = axis.len() - 1;
    if lv >= axis[last].ln() {
        return (last, last, 0.0);
    }
    let k = axis.partition_point(|a| a.ln() <= lv) - 1;
    let (a, b) = (axis[k].ln(), axis[k + 1].ln());
    (k, k + 1, (lv - a) / (b - a))
}

impl CalibrationTable {
    pub fn synthetic() -> Self {
        let ratios = vec![0.01, 0.1, 1.0, 10.0, 100.0];
        let inputs_pa = vec![1.0, 10.0, 100.0, 1_000.0, 10_000.0, 100_000.0];
        let effective = ratios
            .iter()
            .map(|&r| inputs_pa.iter().map(|&i| r * (1.0 + synthetic_relative_error(i))).collect())
            .collect();
        Self {
            ratios,
            inputs_pa,
            effective,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.iter().all(|&x| x > 0.0) && v.windows(2).all(|w| w[0] < w[1]);
        if self.ratios.is_empty() || self.inputs_pa.is_empty() || !increasing(&self.ratios) || !increasing(&self.inputs_pa) {
            return Err(Error::Data("calibration axes must be positive and strictly increasing".into()));
        }
        if self.effective.len() != self.ratios.len()
            || self.effective.iter().any(|row| row.len() != self.inputs_pa.len() || row.iter().any(|&v| !(v > 0.0)))
        {
            return Err(Error::Data("calibration grid must be complete with positive entries".into()));
        }
        Ok(())
    }

    /// Effective ratio for a mirror of nominal `ratio` carrying `input_pa`.
    pub fn effective_ratio(&self, ratio: f64, input_pa: f64) -> f64 {
        if ratio <= 0.0 || input_pa <= 0.0 {
            return ratio.max(0.0);
        }
        let (r0, r1, fr) = bracket(&self.ratios, ratio);
        let (i0, i1, fi) = bracket(&self.inputs_pa, input_pa);
        // interpolate the relative error so that ratios off the grid scale
        let rel = |r: usize, i: usize| (self.effective[r][i] / self.ratios[r]).ln();
        let lo = rel(r0, i0) * (1.0 - fi) + rel(r0, i1) * fi;
        let hi = rel(r1, i0) * (1.0 - fi) + rel(r1, i1) * fi;
        ratio * (lo * (1.0 - fr) + hi * fr).exp()
    }

    /// Reads `target_ratio,input_pA,effective_ratio` rows forming a full grid.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        let mut ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut inputs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in [&mut ratios, &mut inputs] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut effective = vec![vec![f64::NAN; inputs.len()]; ratios.len()];
        for (r, i, e) in rows {
            let ri = ratios.iter().position(|&x| x == r).unwrap();
            let ii = inputs.iter().position(|&x| x == i).unwrap();
            effective[ri][ii] = e;
        }
        let t = Self {
            ratios,
            inputs_pa: inputs,
            effective,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["target_ratio", "input_pA", "effective_ratio"])?;
        for (r, row) in self.ratios.iter().zip(&self.effective) {
            for (i, e) in self.inputs_pa.iter().zip(row) {
                wr.write_record([r.to_string(), i.to_string(), e.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Output current of one mirror.
pub fn mirror_out(ratio: f64, input_pa: f64, mode: MirrorMode, table: &CalibrationTable) -> f64 {
    match mode {
        MirrorMode::Ideal => ratio * input_pa,
        MirrorMode::Calibrated => table.effective_ratio(ratio, input_pa) * input_pa,
    }
}
