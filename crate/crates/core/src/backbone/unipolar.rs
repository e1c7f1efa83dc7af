use serde::{Deserialize, Serialize};

use crate::cells::{bmru_step, sign, BmruParams};
use crate::error::Result;
use crate::params::Linear;
use crate::tensor::Tensor;

/// Bipolar cell (states `+-alpha`) followed by a linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipolarBmruNet {
    pub cell: BmruParams,
    pub head: Linear,
}

/// Same gates, states in `{0, alpha}`, head `(2W, b - W alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnipolarBmruNet {
    pub cell: BmruParams,
    pub head: Linear,
}

impl BipolarBmruNet {
    /// Per-frame logits from bipolar initial state `h0`.
    pub fn logits(&self, seq: &Tensor, h0: &[f64]) -> Result<Tensor> {
        let mut h = h0.to_vec();
        let mut rows = Vec::with_capacity(seq.rows());
        for t in 0..seq.rows() {
            h = bmru_step(&self.cell, seq.row_slice(t), &h)?;
            rows.push(self.head.apply(&h));
        }
        Tensor::from_rows(&rows)
    }
}

impl UnipolarBmruNet {
    /// `h+ = (h + alpha) / 2`.
    pub fn initial_state(&self, bipolar_h0: &[f64]) -> Vec<f64> {
        bipolar_h0
            .iter()
            .zip(self.cell.alpha.data())
            .map(|(h, a)| (h + a) / 2.0)
            .collect()
    }

    /// `h+ = z alpha H(h_hat) + (1 - z) h+_prev`.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let (h_hat, z) = self.cell.gates(x);
        (0..h_prev.len())
            .map(|i| {
                let set = (sign(h_hat[i]) + 1.0) / 2.0;
                z[i] * set * self.cell.alpha.data()[i] + (1.0 - z[i]) * h_prev[i]
            })
            .collect()
    }

    pub fn logits(&self, seq: &Tensor, h0_plus: &[f64]) -> Result<Tensor> {
        let mut h = h0_plus.to_vec();
        let mut rows = Vec::with_capacity(seq.rows());
        for t in 0..seq.rows() {
            h = self.step(seq.row_slice(t), &h);
            rows.push(self.head.apply(&h));
        }
        Tensor::from_rows(&rows)
    }
}

/// Exact unipolar equivalent of a bipolar network: `W~ = 2W`,
/// `b~ = b - W alpha`.
pub fn reparameterize_unipolar(net: &BipolarBmruNet) -> UnipolarBmruNet {
    let w = &net.head.w;
    let alpha = net.cell.alpha.data();
    let w2 = w.scale(2.0);
    let b2: Vec<f64> = (0..w.rows())
        .map(|o| net.head.b.data()[o] - crate::tensor::dot(w.row_slice(o), alpha))
        .collect();
    UnipolarBmruNet {
        cell: net.cell.clone(),
        head: Linear::new(w2, Tensor::row(b2)),
    }
}
