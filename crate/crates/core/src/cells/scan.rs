//! Affine recurrences `h_t = a_t * h_{t-1} + b_t` evaluated sequentially or
//! with a blocked Blelloch scan over [`AffineScanElement`]s.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

/// Default number of timesteps scanned sequentially inside one block.
pub const DEFAULT_BLOCK: usize = 64;

pub trait ScanScalar: Copy + Add<Output = Self> + Mul<Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
}

impl ScanScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
}

impl ScanScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
}

/// One step of an element-wise affine recurrence, `h -> a * h + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineScanElement<S> {
    pub a: Vec<S>,
    pub b: Vec<S>,
}

impl<S: ScanScalar> AffineScanElement<S> {
    pub fn new(a: Vec<S>, b: Vec<S>) -> Self {
        assert_eq!(a.len(), b.len(), "affine element halves differ in width");
        Self { a, b }
    }

    pub fn identity(width: usize) -> Self {
        Self {
            a: vec![S::one(); width],
            b: vec![S::zero(); width],
        }
    }

    pub fn width(&self) -> usize {
        self.a.len()
    }

    /// `self` applied first, then `later`: `(a, b) o (a', b') = (a a', a' b + b')`.
    pub fn then(&self, later: &Self) -> Self {
        let a = self.a.iter().zip(&later.a).map(|(&x, &y)| x * y).collect();
        let b = self
            .b
            .iter()
            .zip(later.a.iter().zip(&later.b))
            .map(|(&b, (&a2, &b2))| a2 * b + b2)
            .collect();
        Self { a, b }
    }

    pub fn apply(&self, h: &[S]) -> Vec<S> {
        h.iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&h, (&a, &b))| a * h + b)
            .collect()
    }
}

/// Plain left-to-right evaluation; returns `h_1..h_T`.
pub fn sequential<S: ScanScalar>(elems: &[AffineScanElement<S>], h0: &[S]) -> Vec<Vec<S>> {
    let mut out = Vec::with_capacity(elems.len());
    let mut h = h0.to_vec();
    for e in elems {
        h = e.apply(&h);
        out.push(h.clone());
    }
    out
}

/// Work-efficient exclusive scan (up-sweep / down-sweep). Entry `i` of the
/// result is the composition of `elems[..i]`, identity for `i = 0`.
pub fn blelloch_exclusive<S: ScanScalar>(elems: &[AffineScanElement<S>]) -> Vec<AffineScanElement<S>> {
    let n = elems.len();
    if n == 0 {
        return Vec::new();
    }
    let width = elems[0].width();
    let size = n.next_power_of_two();
    let mut tree: Vec<AffineScanElement<S>> = elems.to_vec();
    tree.resize(size, AffineScanElement::identity(width));

    let mut stride = 1;
    while stride < size {
        let step = stride * 2;
        for right in (step - 1..size).step_by(step) {
            let left = right - stride;
            tree[right] = tree[left].then(&tree[right]);
        }
        stride = step;
    }

    tree[size - 1] = AffineScanElement::identity(width);
    let mut stride = size / 2;
    while stride >= 1 {
        let step = stride * 2;
        for right in (step - 1..size).step_by(step) {
            let left = right - stride;
            let carried = tree[right].clone();
            tree[right] = carried.then(&tree[left]);
            tree[left] = carried;
        }
        stride /= 2;
    }
    tree.truncate(n);
    tree
}

/// Inclusive prefixes `e_0 o ... o e_t` for every `t`, computed by scanning
/// blocks of `block` steps locally and stitching them with a Blelloch scan
/// over the block totals. The composition tree depends only on `block` and
/// the length, never on thread scheduling.
pub fn inclusive_prefixes<S: ScanScalar>(
    elems: &[AffineScanElement<S>],
    block: usize,
) -> Vec<AffineScanElement<S>> {
    let block = block.max(1);
    let local: Vec<Vec<AffineScanElement<S>>> = elems
        .par_chunks(block)
        .map(|chunk| {
            let mut acc: Vec<AffineScanElement<S>> = Vec::with_capacity(chunk.len());
            for e in chunk {
                let next = match acc.last() {
                    Some(prev) => prev.then(e),
                    None => e.clone(),
                };
                acc.push(next);
            }
            acc
        })
        .collect();
    if local.len() <= 1 {
        return local.into_iter().flatten().collect();
    }
    let totals: Vec<_> = local.iter().map(|b| b.last().unwrap().clone()).collect();
    let offsets = blelloch_exclusive(&totals);
    local
        .into_par_iter()
        .zip(offsets.into_par_iter())
        .enumerate()
        .flat_map_iter(|(j, (blk, off))| {
            let first = j == 0;
            blk.into_iter()
                .map(move |p| if first { p } else { off.then(&p) })
        })
        .collect()
}

/// Parallel evaluation of the recurrence; returns `h_1..h_T`.
pub fn parallel<S: ScanScalar>(
    elems: &[AffineScanElement<S>],
    h0: &[S],
    block: usize,
) -> Vec<Vec<S>> {
    inclusive_prefixes(elems, block)
        .iter()
        .map(|p| p.apply(h0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(a: f64, b: f64) -> AffineScanElement<f64> {
        AffineScanElement::new(vec![a], vec![b])
    }

    #[test]
    fn set_overrides_hold() {
        let alpha = 0.7;
        assert_eq!(el(1.0, 0.0).then(&el(0.0, alpha)), el(0.0, alpha));
    }

    #[test]
    fn hold_preserves_prior_set() {
        let alpha = 0.7;
        assert_eq!(el(0.0, alpha).then(&el(1.0, 0.0)), el(0.0, alpha));
    }

    #[test]
    fn exclusive_scan_starts_with_identity() {
        let xs = vec![el(2.0, 1.0), el(3.0, -1.0), el(0.5, 4.0)];
        let ex = blelloch_exclusive(&xs);
        assert_eq!(ex[0], AffineScanElement::identity(1));
        assert_eq!(ex[1], xs[0]);
        assert_eq!(ex[2], xs[0].then(&xs[1]));
    }

    fn discrete_elem() -> impl Strategy<Value = AffineScanElement<f64>> {
        (0u8..3, 0.01f64..2.0).prop_map(|(k, alpha)| match k {
            0 => el(1.0, 0.0),
            1 => el(0.0, alpha),
            _ => el(0.0, 0.0),
        })
    }

    proptest! {
        #[test]
        fn composition_is_associative_on_discrete_elements(
            e1 in discrete_elem(), e2 in discrete_elem(), e3 in discrete_elem()
        ) {
            prop_assert_eq!(e1.then(&e2).then(&e3), e1.then(&e2.then(&e3)));
        }

        #[test]
        fn composition_is_associative_on_dyadic_values(
            a in prop::array::uniform3(-8i32..8), b in prop::array::uniform3(-8i32..8)
        ) {
            // Quarter-integers keep every product and sum exactly representable.
            let e: Vec<_> = (0..3).map(|i| el(a[i] as f64 / 4.0, b[i] as f64 / 4.0)).collect();
            prop_assert_eq!(e[0].then(&e[1]).then(&e[2]), e[0].then(&e[1].then(&e[2])));
        }

        #[test]
        fn blocked_scan_matches_sequential_for_discrete_cells(
            elems in prop::collection::vec(discrete_elem(), 1..300),
            h0 in 0.0f64..2.0,
            block in 1usize..80,
        ) {
            let seq = sequential(&elems, &[h0]);
            let par = parallel(&elems, &[h0], block);
            prop_assert_eq!(seq, par);
        }
    }

    #[test]
    fn complex_scan_close_to_sequential() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let elems: Vec<_> = (0..200)
            .map(|_| {
                let r = rng.random_range(0.9..0.999);
                let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                AffineScanElement::new(
                    vec![Complex64::from_polar(r, th)],
                    vec![Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))],
                )
            })
            .collect();
        let h0 = [Complex64::new(0.3, -0.2)];
        let seq = sequential(&elems, &h0);
        let par = parallel(&elems, &h0, 16);
        for (s, p) in seq.iter().zip(&par) {
            assert!((s[0] - p[0]).norm() < 1e-10);
        }
    }
}
