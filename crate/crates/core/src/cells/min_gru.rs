use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scan::AffineScanElement;
use crate::autodiff::{sigmoid, ScanMode, Var};
use crate::error::{shape_err, Result};
use crate::params::{fan_in_bound, join, uniform, Binder, Constraint, Parameterized, Visit, VisitMut};
use crate::tensor::{dot, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinGruParams {
    pub w_z: Tensor,
    pub b_z: Tensor,
    pub w_h: Tensor,
    pub b_h: Tensor,
}

impl MinGruParams {
    pub fn d(&self) -> usize {
        self.w_z.rows()
    }

    pub fn m(&self) -> usize {
        self.w_z.cols()
    }

    /// `(z, h_tilde)` for one frame.
    pub fn gates(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (0..self.d())
            .map(|i| {
                let z = sigmoid(dot(self.w_z.row_slice(i), x) + self.b_z.data()[i]);
                let h = dot(self.w_h.row_slice(i), x) + self.b_h.data()[i];
                (z, h)
            })
            .unzip()
    }

    pub fn element(&self, x: &[f64]) -> AffineScanElement<f64> {
        let (z, h) = self.gates(x);
        let a = z.iter().map(|z| 1.0 - z).collect();
        let b = z.iter().zip(&h).map(|(z, h)| z * h).collect();
        AffineScanElement::new(a, b)
    }
}

impl Parameterized for MinGruParams {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        f(&join(prefix, "w_z"), &self.w_z, Constraint::None);
        f(&join(prefix, "b_z"), &self.b_z, Constraint::None);
        f(&join(prefix, "w_h"), &self.w_h, Constraint::None);
        f(&join(prefix, "b_h"), &self.b_h, Constraint::None);
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        f(&join(prefix, "w_z"), &mut self.w_z, Constraint::None);
        f(&join(prefix, "b_z"), &mut self.b_z, Constraint::None);
        f(&join(prefix, "w_h"), &mut self.w_h, Constraint::None);
        f(&join(prefix, "b_h"), &mut self.b_h, Constraint::None);
    }
}

pub fn init_min_gru(d: usize, m: usize, rng: &mut ChaCha8Rng) -> MinGruParams {
    let bound = fan_in_bound(m);
    MinGruParams {
        w_z: uniform(d, m, bound, rng),
        b_z: uniform(1, d, bound, rng),
        w_h: uniform(d, m, bound, rng),
        b_h: uniform(1, d, bound, rng),
    }
}

/// `h = (1 - z) h_prev + z h_tilde`, `z = sigmoid(W_z x + b_z)`.
pub fn min_gru_step(p: &MinGruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.m() || h_prev.len() != p.d() {
        return Err(shape_err(
            "min_gru_step",
            format!("x {} / h {} for a {}x{} cell", x.len(), h_prev.len(), p.d(), p.m()),
        ));
    }
    Ok(p.element(x).apply(h_prev))
}

pub struct MinGruVars<'t> {
    pub w_z: Var<'t>,
    pub b_z: Var<'t>,
    pub w_h: Var<'t>,
    pub b_h: Var<'t>,
}

impl MinGruParams {
    pub fn bind<'t>(&self, binder: &Binder<'t>, prefix: &str) -> MinGruVars<'t> {
        let mut v = Vec::new();
        self.visit(prefix, &mut |name, t, c| v.push(binder.bind(name, t, c)));
        MinGruVars {
            w_z: v[0],
            b_z: v[1],
            w_h: v[2],
            b_h: v[3],
        }
    }
}

impl<'t> MinGruVars<'t> {
    /// Candidate `h_tilde`.
    pub fn candidate(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.linear(self.w_h, Some(self.b_h))
    }

    /// `extra` is added to the recurrence input `z h_tilde`, which is where
    /// state noise enters.
    pub fn scan(
        &self,
        x: Var<'t>,
        h_tilde: Var<'t>,
        h0: Var<'t>,
        extra: Option<&Tensor>,
        batch: usize,
        mode: ScanMode,
    ) -> Result<Var<'t>> {
        let z = x.linear(self.w_z, Some(self.b_z))?.sigmoid();
        let a = z.one_minus();
        let mut b = z.mul(h_tilde)?;
        if let Some(e) = extra {
            b = b.add_const(e)?;
        }
        Var::affine_scan(a, b, h0, batch, mode)
    }
}
