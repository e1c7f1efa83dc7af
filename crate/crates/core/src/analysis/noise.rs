use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::backbone::{majority_vote, sample_rows, time_major, ForwardCtx, SequenceModel};
use crate::data::SequenceSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepConfig {
    /// Multiples of `analog_noise_rel`.
    pub levels: Vec<f64>,
    /// Noise standard deviation at level 1, relative to each stage's RMS.
    pub analog_noise_rel: f64,
    pub instantiations: usize,
    pub seed: u64,
    pub chunk: usize,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.5, 1.0, 2.0, 4.0],
            analog_noise_rel: 0.05,
            instantiations: 10,
            seed: 0,
            chunk: 32,
        }
    }
}

impl NoiseSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.iter().any(|l| !(*l > 0.0)) || !(self.analog_noise_rel >= 0.0) {
            return Err(Error::Config("noise levels must be positive".into()));
        }
        if self.instantiations == 0 || self.chunk == 0 {
            return Err(Error::Config("instantiations and chunk must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub level: f64,
    pub accuracy: f64,
}

/// RMS of every probe over a clean eval pass of `set`.
pub fn probe_rms<M: SequenceModel + ?Sized>(model: &M, set: &SequenceSet, chunk: usize) -> Result<HashMap<String, f64>> {
    let mut acc: HashMap<String, (f64, usize)> = HashMap::new();
    for part in set.seqs.chunks(chunk.max(1)) {
        let refs: Vec<&Tensor> = part.iter().collect();
        let tape = Tape::new();
        let mut ctx = ForwardCtx::eval(&tape);
        model.forward(&mut ctx, tape.constant(time_major(&refs)?), refs.len())?;
        for (name, v) in &ctx.probes {
            let e = acc.entry(name.clone()).or_default();
            e.0 += v.value().sq_norm();
            e.1 += v.value().len();
        }
    }
    Ok(acc
        .into_iter()
        .map(|(k, (s, n))| (k, (s / n.max(1) as f64).sqrt()))
        .collect())
}

fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x9E37_79B9_7F4A_7C15u64, |h, &p| (h ^ p).wrapping_mul(0x1000_0000_01B3).rotate_left(29))
}

/// Accuracy of `model` on `set` with i.i.d. Gaussian noise of standard
/// deviation `rel * rms[stage]` added at every stage the model exposes.
fn noisy_accuracy<M: SequenceModel + ?Sized>(
    model: &M,
    set: &SequenceSet,
    rms: &HashMap<String, f64>,
    rel: f64,
    cfg: &NoiseSweepConfig,
    tag: u64,
) -> Result<f64> {
    let mut correct = 0usize;
    for (ci, (part, labels)) in set.seqs.chunks(cfg.chunk).zip(set.labels.chunks(cfg.chunk)).enumerate() {
        let refs: Vec<&Tensor> = part.iter().collect();
        let x = time_major(&refs)?;
        for inst in 0..cfg.instantiations {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.seed, tag, ci as u64, inst as u64]));
            let mut hook = |name: &str, rows: usize, cols: usize| -> Option<Tensor> {
                let sd = rel * rms.get(name)?;
                let data = (0..rows * cols)
                    .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect();
                Tensor::from_vec(rows, cols, data).ok()
            };
            let tape = Tape::new();
            let mut ctx = ForwardCtx::eval(&tape).with_noise(&mut hook);
            let logits = model.forward(&mut ctx, tape.constant(x.clone()), refs.len())?.value();
            for (b, &label) in labels.iter().enumerate() {
                if majority_vote(&sample_rows(&logits, refs.len(), b)) == label {
                    correct += 1;
                }
            }
        }
    }
    Ok(correct as f64 / (set.len() * cfg.instantiations) as f64)
}

/// Accuracy per variant and noise level. Each variant starts with a
/// level-0 row holding its clean accuracy. Levels share noise draws, so
/// rows differ only in scale.
pub fn noise_sweep(
    variants: &[(&str, &dyn SequenceModel)],
    set: &SequenceSet,
    cfg: &NoiseSweepConfig,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let mut rows = Vec::new();
    for (vi, (name, model)) in variants.iter().enumerate() {
        let rms = probe_rms(*model, set, cfg.chunk)?;
        let clean = crate::quant::accuracy(*model, set)?;
        rows.push(SweepRow {
            variant: name.to_string(),
            level: 0.0,
            accuracy: clean,
        });
        for &level in &cfg.levels {
            let acc = noisy_accuracy(
                *model,
                set,
                &rms,
                level * cfg.analog_noise_rel,
                cfg,
                vi as u64,
            )?;
            rows.push(SweepRow {
                variant: name.to_string(),
                level,
                accuracy: acc,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "level", "accuracy"])?;
    for r in rows {
        w.write_record([r.variant.clone(), r.level.to_string(), r.accuracy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
