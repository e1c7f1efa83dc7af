use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SequenceSet;
use crate::error::{Error, Result};

/// Every sample of `target` (label 1) plus as many distinct others
/// (label 0), drawn without replacement.
pub fn balanced_kws_split(set: &SequenceSet, target: usize, seed: u64) -> Result<SequenceSet> {
    let pos: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == target).collect();
    let neg: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] != target).collect();
    if pos.is_empty() {
        return Err(Error::Data(format!("no samples of class {target}")));
    }
    if neg.len() < pos.len() {
        return Err(Error::Data(format!(
            "{} positives but only {} negatives",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, neg.len(), pos.len());
    let mut seqs = Vec::with_capacity(2 * pos.len());
    let mut labels = Vec::with_capacity(2 * pos.len());
    for &i in &pos {
        seqs.push(set.seqs[i].clone());
        labels.push(1);
    }
    for k in picked.iter() {
        seqs.push(set.seqs[neg[k]].clone());
        labels.push(0);
    }
    SequenceSet::new(seqs, labels, 2)
}
