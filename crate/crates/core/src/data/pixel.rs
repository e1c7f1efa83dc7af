use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IdxImages, SequenceSet};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelMode {
    /// One pixel per step.
    Raster784,
    /// One image row per step.
    Row28,
    /// One pixel per step in a fixed shuffled order.
    Permuted(u64),
}

pub fn normalize_pixel(p: u8) -> f64 {
    p as f64 / 255.0
}

pub fn make_permutation_n(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

pub fn make_permutation(seed: u64) -> Vec<usize> {
    make_permutation_n(784, seed)
}

pub fn pixel_task(images: &IdxImages, labels: &[u8], mode: PixelMode) -> Result<SequenceSet> {
    let size = images.rows * images.cols;
    let perm = match mode {
        PixelMode::Permuted(seed) => Some(make_permutation_n(size, seed)),
        _ => None,
    };
    let mut seqs = Vec::with_capacity(images.n);
    for i in 0..images.n {
        let img = images.image(i);
        let t = match (mode, &perm) {
            (PixelMode::Row28, _) => {
                Tensor::from_vec(images.rows, images.cols, img.iter().map(|&p| normalize_pixel(p)).collect())?
            }
            (_, Some(perm)) => Tensor::from_vec(size, 1, perm.iter().map(|&k| normalize_pixel(img[k])).collect())?,
            _ => Tensor::from_vec(size, 1, img.iter().map(|&p| normalize_pixel(p)).collect())?,
        };
        seqs.push(t);
    }
    let n_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    SequenceSet::new(seqs, labels.iter().map(|&l| l as usize).collect(), n_classes)
}
