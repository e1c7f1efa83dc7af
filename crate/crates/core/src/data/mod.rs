//! Datasets: IDX pixel tasks, FSEQ feature files, the synthetic keyword
//! task, splits and batching.

mod fseq;
mod idx;
mod kws;
mod pixel;
mod synth;

#[cfg(test)]
mod tests;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use fseq::{read_fseq, read_fseq_file, write_fseq, write_fseq_file, FSEQ_MAGIC, FSEQ_VERSION};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use kws::balanced_kws_split;
pub use pixel::{make_permutation, make_permutation_n, normalize_pixel, pixel_task, PixelMode};
pub use synth::SyntheticTask;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labelled sequences, each a T×D tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSet {
    pub seqs: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl SequenceSet {
    pub fn new(seqs: Vec<Tensor>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if seqs.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} sequences but {} labels",
                seqs.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!("label {l} out of range for {n_classes} classes")));
        }
        if let Some(first) = seqs.first() {
            let shape = first.shape().to_vec();
            if seqs.iter().any(|s| s.shape() != shape.as_slice()) {
                return Err(Error::Data("sequences differ in shape".into()));
            }
        }
        Ok(Self { seqs, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn t_len(&self) -> usize {
        self.seqs.first().map_or(0, |s| s.rows())
    }

    pub fn d_in(&self) -> usize {
        self.seqs.first().map_or(0, |s| s.cols())
    }

    pub fn head(&self, n: usize) -> SequenceSet {
        self.subset(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    pub fn subset(&self, idx: &[usize]) -> SequenceSet {
        SequenceSet {
            seqs: idx.iter().map(|&i| self.seqs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Shuffles with `seed` and puts `val_frac` of the samples in the second set.
    pub fn split(&self, val_frac: f64, seed: u64) -> Result<(SequenceSet, SequenceSet)> {
        if !(0.0..=1.0).contains(&val_frac) {
            return Err(Error::Config(format!("val fraction {val_frac} outside [0, 1]")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = (self.len() as f64 * val_frac).round() as usize;
        Ok((self.subset(&idx[n_val..]), self.subset(&idx[..n_val])))
    }

    /// Index batches over one shuffled epoch; the last batch may be short.
    pub fn batches(&self, batch: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.chunks(batch.max(1)).map(|c| c.to_vec()).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}
