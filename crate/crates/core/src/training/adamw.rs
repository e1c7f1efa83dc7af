use std::collections::BTreeMap;

use crate::autodiff::{softplus, softplus_inv, GradStore};
use crate::params::{Constraint, Parameterized};

/// AdamW with decoupled weight decay. Positive parameters are updated in
/// their softplus pre-image and written back as effective values.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            weight_decay,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Parameters without a gradient entry only decay.
    pub fn step<P: Parameterized + ?Sized>(&mut self, params: &mut P, grads: &GradStore, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (ms, vs) = (&mut self.m, &mut self.v);
        params.visit_mut("", &mut |name, tensor, constraint| {
            let n = tensor.len();
            let m = ms.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
            let v = vs.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
            let g = grads.get(name).map(|g| g.data());
            for (i, w) in tensor.data_mut().iter_mut().enumerate() {
                let gi = g.map_or(0.0, |g| g[i]);
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                let raw = match constraint {
                    Constraint::None => *w,
                    Constraint::Positive => softplus_inv(*w),
                };
                let raw = raw - lr * update - lr * wd * raw;
                *w = match constraint {
                    Constraint::None => raw,
                    Constraint::Positive => softplus(raw),
                };
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Linear;
    use crate::tensor::Tensor;
    use crate::training::{lr_at, TrainConfig};

    #[test]
    fn zero_gradient_gives_pure_decoupled_decay() {
        let mut p = Linear::new(Tensor::from_vec(1, 2, vec![2.0, -4.0]).unwrap(), Tensor::row(vec![1.0]));
        let mut opt = AdamW::new(0.9, 0.999, 1e-8, 1e-2);
        let grads = GradStore::new();
        opt.step(&mut p, &grads, 0.1);
        assert_eq!(p.w.data(), &[2.0 - 0.1 * 1e-2 * 2.0, -4.0 - 0.1 * 1e-2 * -4.0]);
        assert_eq!(p.b.data(), &[1.0 - 0.1 * 1e-2]);
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        use crate::autodiff::Tape;
        let target = Tensor::from_vec(1, 3, vec![0.7, -1.3, 2.1]).unwrap();
        let mut p = Linear::new(Tensor::zeros(1, 3), Tensor::row(vec![0.5]));
        let mut opt = AdamW::new(0.9, 0.999, 1e-8, 0.0);
        let cfg = TrainConfig {
            lr0: 0.1,
            max_iters: 500,
            ..TrainConfig::default()
        };
        for it in 0..500 {
            let tape = Tape::new();
            let w = tape.leaf("w", p.w.clone());
            let b = tape.leaf("b", p.b.clone());
            let loss = w.add_const(&target.scale(-1.0)).unwrap().square().sum().add(b.square().sum()).unwrap();
            let mut g = GradStore::new();
            tape.backward(loss, &mut g).unwrap();
            opt.step(&mut p, &g, lr_at(&cfg, it + 1));
        }
        assert!(p.w.sub(&target).unwrap().max_abs() < 1e-3, "{:?}", p.w);
        assert!(p.b.data()[0].abs() < 1e-3);
    }
}
