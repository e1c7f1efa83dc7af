use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SequenceSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Time profile of one keyword occurrence.
pub const ENVELOPE: [f64; 6] = [0.3, 0.7, 1.0, 1.0, 0.7, 0.3];

/// Keyword-spotting stand-in: non-negative background with one pulse
/// template per positive class. Class 0 carries no keyword but may carry
/// a distractor pulse on a different feature pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub n_classes: usize,
    pub t_len: usize,
    pub d_in: usize,
    /// Background drawn uniformly from [0, background].
    pub background: f64,
    pub amp_lo: f64,
    pub amp_hi: f64,
    /// Latest pulse start; later onsets leave fewer keyword frames for the vote.
    pub onset_max: usize,
    pub distractor_prob: f64,
    pub template_seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            n_classes: 2,
            t_len: 101,
            d_in: 13,
            background: 0.3,
            amp_lo: 0.6,
            amp_hi: 1.2,
            onset_max: 47,
            distractor_prob: 0.5,
            template_seed: 17,
        }
    }
}

impl SyntheticTask {
    /// Same templates with weaker and later keywords, so that samples
    /// range from confident to barely decided.
    pub fn boundary() -> Self {
        Self {
            amp_lo: 0.2,
            onset_max: 94,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.d_in < 3 {
            return Err(Error::Config("need at least 2 classes and 3 features".into()));
        }
        if self.onset_max + ENVELOPE.len() > self.t_len {
            return Err(Error::Config(format!(
                "onset_max {} leaves no room for the pulse in {} steps",
                self.onset_max, self.t_len
            )));
        }
        if !(0.0 <= self.amp_lo && self.amp_lo <= self.amp_hi) || self.background < 0.0 {
            return Err(Error::Config("amplitudes and background must be non-negative and ordered".into()));
        }
        Ok(())
    }

    /// Row 0 is the distractor, row c the keyword of class c.
    pub fn templates(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.template_seed);
        let active = (self.d_in / 3).max(1);
        let mut feats: Vec<usize> = (0..self.d_in).collect();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.n_classes);
        while out.len() < self.n_classes {
            feats.shuffle(&mut rng);
            let chosen = &feats[..active];
            // keep at least half the pattern private to this template
            let private = chosen.iter().filter(|&&f| out.iter().all(|t| t[f] == 0.0)).count();
            if 2 * private < active && out.len() < self.d_in / active {
                continue;
            }
            let mut t = vec![0.0; self.d_in];
            for &f in chosen {
                t[f] = rng.random_range(0.6..=1.0);
            }
            out.push(t);
        }
        out
    }

    /// `n` samples with near-equal class counts in shuffled order.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SequenceSet> {
        self.validate()?;
        let templates = self.templates();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<usize> = (0..n).map(|i| i % self.n_classes).collect();
        labels.shuffle(&mut rng);
        let mut seqs = Vec::with_capacity(n);
        for &label in &labels {
            let mut x = Tensor::zeros(self.t_len, self.d_in);
            for v in x.data_mut() {
                *v = rng.random_range(0.0..=self.background);
            }
            let pulse = if label > 0 {
                Some(label)
            } else if rng.random_bool(self.distractor_prob) {
                Some(0)
            } else {
                None
            };
            if let Some(k) = pulse {
                let onset = rng.random_range(0..=self.onset_max);
                let amp = rng.random_range(self.amp_lo..=self.amp_hi);
                for (dt, e) in ENVELOPE.iter().enumerate() {
                    for (f, &w) in templates[k].iter().enumerate() {
                        let t = onset + dt;
                        x.set(t, f, x.get(t, f) + amp * e * w);
                    }
                }
            }
            seqs.push(x);
        }
        SequenceSet::new(seqs, labels, self.n_classes)
    }
}
