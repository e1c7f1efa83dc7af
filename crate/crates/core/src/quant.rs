//! Post-training uniform quantization, one range per named tensor.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backbone::{predict, SequenceModel};
use crate::data::SequenceSet;
use crate::error::{Error, Result};
use crate::params::Parameterized;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub bits: u32,
}

impl QuantSpec {
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=32).contains(&bits) {
            return Err(Error::Config(format!("bit width {bits} outside 1..=32")));
        }
        Ok(Self { bits })
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }
}

/// Grid index of `w` in `[lo, hi]` with `2^bits` levels, rounding half
/// away from zero (`f64::round`).
pub fn grid_index(w: f64, lo: f64, hi: f64, bits: u32) -> u64 {
    if hi <= lo {
        return 0;
    }
    let top = ((1u64 << bits) - 1) as f64;
    ((w - lo) / (hi - lo) * top).round().clamp(0.0, top) as u64
}

/// Value of grid index `k`. The endpoints are returned exactly so that the
/// range, and hence the grid, survives a second pass unchanged.
pub fn grid_value(k: u64, lo: f64, hi: f64, bits: u32) -> f64 {
    let top = (1u64 << bits) - 1;
    if hi <= lo || k == 0 {
        lo
    } else if k >= top {
        hi
    } else {
        k as f64 * ((hi - lo) / top as f64) + lo
    }
}

pub fn quantize_values(values: &mut [f64], bits: u32) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in values {
        *v = grid_value(grid_index(*v, lo, hi, bits), lo, hi, bits);
    }
}

/// Quantizes every stored tensor (weights, biases, and the effective
/// thresholds, widths and gains) on its own range.
pub fn quantize<P: Parameterized + Clone>(params: &P, spec: QuantSpec) -> Result<P> {
    QuantSpec::new(spec.bits)?;
    let mut out = params.clone();
    out.visit_mut("", &mut |_, t, _| quantize_values(t.data_mut(), spec.bits));
    Ok(out)
}

pub fn accuracy<M: SequenceModel + ?Sized>(model: &M, set: &SequenceSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let pred = predict(model, &set.seqs, 64)?;
    let hits = pred.iter().zip(&set.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / set.len() as f64)
}

/// One row per requested width; `bits = 0` is the unquantized model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantRow {
    pub bits: u32,
    pub accuracy: f64,
}

pub fn quantization_report<M: SequenceModel + Clone>(model: &M, set: &SequenceSet, bits: &[u32]) -> Result<Vec<QuantRow>> {
    bits.iter()
        .map(|&b| {
            let accuracy = if b == 0 {
                accuracy(model, set)?
            } else {
                accuracy(&quantize(model, QuantSpec::new(b)?)?, set)?
            };
            Ok(QuantRow { bits: b, accuracy })
        })
        .collect()
}

pub fn write_quant_csv<W: Write>(rows: &[QuantRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bits", "accuracy"])?;
    for r in rows {
        w.write_record([r.bits.to_string(), r.accuracy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
