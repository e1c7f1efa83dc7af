//! Noise-robustness sweeps, Monte Carlo mismatch and the power model.

mod mismatch;
mod noise;
mod power;

pub use mismatch::{mismatch_mc, select_by_margin, write_draws_csv, write_mismatch_csv, MismatchReport, MismatchRun, SampleRecord};
pub use noise::{noise_sweep, probe_rms, write_sweep_csv, NoiseSweepConfig, SweepRow};
pub use power::{power_report, write_power_csv, PowerModel, PowerRow};

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[cfg(test)]
mod tests;
