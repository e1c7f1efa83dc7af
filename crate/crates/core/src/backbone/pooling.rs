use serde::{Deserialize, Serialize};

use crate::tensor::{argmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingRule {
    /// Training: cross-entropy averaged over timesteps.
    MeanLogitTraining,
    /// Inference: per-timestep argmax votes.
    MajorityVoteInference,
    None,
}

/// Per-class count of timesteps whose argmax is that class.
pub fn vote_counts(logits: &Tensor) -> Vec<usize> {
    let mut counts = vec![0; logits.cols()];
    for t in 0..logits.rows() {
        counts[argmax(logits.row_slice(t))] += 1;
    }
    counts
}

/// Most-voted class; ties go to the lowest class index.
pub fn majority_vote(logits: &Tensor) -> usize {
    let counts = vote_counts(logits);
    let votes: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    argmax(&votes)
}

/// Votes of the winner minus votes of the runner-up.
pub fn vote_margin(logits: &Tensor) -> usize {
    let mut counts = vote_counts(logits);
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts[0] - counts.get(1).copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn from_votes(votes: &[usize], classes: usize) -> Tensor {
        let mut t = Tensor::zeros(votes.len(), classes);
        for (r, &v) in votes.iter().enumerate() {
            t.set(r, v, 1.0);
        }
        t
    }

    #[test]
    fn simple_majority() {
        assert_eq!(majority_vote(&from_votes(&[0, 1, 1], 2)), 1);
    }

    #[test]
    fn fifty_one_against_fifty() {
        let mut v = vec![1; 51];
        v.extend(vec![0; 50]);
        let l = from_votes(&v, 2);
        assert_eq!(majority_vote(&l), 1);
        assert_eq!(vote_margin(&l), 1);
    }

    #[test]
    fn even_tie_goes_to_class_zero() {
        let v: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let l = from_votes(&v, 2);
        assert_eq!(majority_vote(&l), 0);
        assert_eq!(vote_margin(&l), 0);
    }

    proptest! {
        #[test]
        fn vote_is_invariant_to_positive_rescaling(
            vals in proptest::collection::vec(-5.0f64..5.0, 3 * 7),
            scales in proptest::collection::vec(0.01f64..100.0, 7),
        ) {
            let l = Tensor::from_vec(7, 3, vals).unwrap();
            let mut s = l.clone();
            for t in 0..7 {
                for c in 0..3 {
                    s.set(t, c, l.get(t, c) * scales[t]);
                }
            }
            prop_assert_eq!(majority_vote(&l), majority_vote(&s));
        }
    }
}
