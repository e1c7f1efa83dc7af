use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analog::{simulate, to_currents, CircuitNetlist, Corner, PerturbationSpec, SimOptions, DEFAULT_LEAKAGE_PA};
use crate::backbone::{majority_vote, vote_margin};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Monte Carlo settings: one static die per draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchRun {
    pub samples: usize,
    pub mirror_sigma: f64,
    pub thresh_sigma: f64,
    pub gain_sigma: f64,
    pub leakage_pa: f64,
    pub seed: u64,
}

impl Default for MismatchRun {
    fn default() -> Self {
        let p = PerturbationSpec::mismatch(0);
        Self {
            samples: 200,
            mirror_sigma: p.mirror_sigma,
            thresh_sigma: p.thresh_sigma,
            gain_sigma: p.gain_sigma,
            leakage_pa: DEFAULT_LEAKAGE_PA,
            seed: 0,
        }
    }
}

impl MismatchRun {
    pub fn spec(&self, draw: usize) -> PerturbationSpec {
        PerturbationSpec {
            mirror_sigma: self.mirror_sigma,
            thresh_sigma: self.thresh_sigma,
            gain_sigma: self.gain_sigma,
            leakage_pa: self.leakage_pa,
            corner: Corner::TT,
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(draw as u64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: usize,
    pub nominal_prediction: usize,
    /// Vote margin of the clean, ideal simulation.
    pub margin: usize,
    /// Fraction of draws whose prediction differs from the nominal one.
    pub impaired_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MismatchReport {
    pub records: Vec<SampleRecord>,
    /// `predictions[draw][sample]`.
    pub predictions: Vec<Vec<usize>>,
}

impl MismatchReport {
    /// Margins of samples flipped by at least one draw, and of the others.
    pub fn split_margins(&self) -> (Vec<f64>, Vec<f64>) {
        let (flipped, stable): (Vec<_>, Vec<_>) = self.records.iter().partition(|r| r.impaired_rate > 0.0);
        (
            flipped.iter().map(|r| r.margin as f64).collect(),
            stable.iter().map(|r| r.margin as f64).collect(),
        )
    }
}

/// Runs every sample (feature frames, not currents) through `run.samples`
/// perturbed dies and records how often each prediction leaves its
/// nominal value.
pub fn mismatch_mc(net: &CircuitNetlist, seqs: &[Tensor], run: &MismatchRun) -> Result<MismatchReport> {
    if seqs.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    let currents: Vec<Tensor> = seqs.iter().map(to_currents).collect();
    let mut nominal = Vec::with_capacity(seqs.len());
    for c in &currents {
        let tr = simulate(net, c, &SimOptions::default())?;
        nominal.push((majority_vote(tr.logits()), vote_margin(tr.logits())));
    }
    let predictions: Vec<Vec<usize>> = (0..run.samples)
        .into_par_iter()
        .map(|draw| {
            let opts = SimOptions::perturbed(run.spec(draw));
            currents
                .iter()
                .map(|c| simulate(net, c, &opts).map(|tr| majority_vote(tr.logits())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records = nominal
        .iter()
        .enumerate()
        .map(|(i, &(pred, margin))| {
            let flips = predictions.iter().filter(|p| p[i] != pred).count();
            SampleRecord {
                sample_id: i,
                nominal_prediction: pred,
                margin,
                impaired_rate: flips as f64 / run.samples.max(1) as f64,
            }
        })
        .collect();
    Ok(MismatchReport { records, predictions })
}

/// Indices of `k` samples at evenly spaced ranks of the nominal vote
/// margin (ties broken by index), so the subset spans confident and
/// boundary cases.
pub fn select_by_margin(net: &CircuitNetlist, seqs: &[Tensor], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > seqs.len() {
        return Err(Error::Data(format!("cannot pick {k} of {} samples", seqs.len())));
    }
    let mut ranked = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((vote_margin(simulate(net, &to_currents(s), &SimOptions::default())?.logits()), i)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_unstable();
    let last = ranked.len() - 1;
    Ok((0..k)
        .map(|j| ranked[if k == 1 { 0 } else { j * last / (k - 1) }].1)
        .collect())
}

pub fn write_mismatch_csv<W: Write>(report: &MismatchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "margin", "impaired_rate"])?;
    for r in &report.records {
        w.write_record([r.sample_id.to_string(), r.margin.to_string(), r.impaired_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per draw: `draw,seed,n_flipped,predictions`, the last field
/// holding the per-sample predictions separated by spaces.
pub fn write_draws_csv<W: Write>(report: &MismatchReport, run: &MismatchRun, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["draw", "seed", "n_flipped", "predictions"])?;
    for (d, preds) in report.predictions.iter().enumerate() {
        let flipped = preds
            .iter()
            .zip(&report.records)
            .filter(|(p, r)| **p != r.nominal_prediction)
            .count();
        let joined = preds.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
        w.write_record([d.to_string(), run.spec(d).seed.to_string(), flipped.to_string(), joined])?;
    }
    w.flush()?;
    Ok(())
}
