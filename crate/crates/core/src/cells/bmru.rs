use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scan::AffineScanElement;
use crate::autodiff::{heaviside, ScanMode, Var};
use crate::error::{shape_err, Result};
use crate::params::{fan_in_bound, join, uniform, unit_open_closed, Binder, Constraint, Parameterized, Visit, VisitMut};
use crate::tensor::{dot, Tensor};

/// Bipolar bistable cell with input-dependent threshold
/// `beta = |W_beta x + b_beta|`. States live in `{-alpha, +alpha}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmruParams {
    pub w_x: Tensor,
    pub b_x: Tensor,
    pub w_beta: Tensor,
    pub b_beta: Tensor,
    pub alpha: Tensor,
}

pub(crate) fn sign(x: f64) -> f64 {
    2.0 * heaviside(x) - 1.0
}

impl BmruParams {
    pub fn d(&self) -> usize {
        self.w_x.rows()
    }

    pub fn n(&self) -> usize {
        self.w_x.cols()
    }

    /// `(h_hat, z)` for one frame.
    pub fn gates(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut h_hat = Vec::with_capacity(self.d());
        let mut z = Vec::with_capacity(self.d());
        for i in 0..self.d() {
            let h = dot(self.w_x.row_slice(i), x) + self.b_x.data()[i];
            let beta = (dot(self.w_beta.row_slice(i), x) + self.b_beta.data()[i]).abs();
            h_hat.push(h);
            z.push(heaviside(h.abs() - beta));
        }
        (h_hat, z)
    }

    pub fn element(&self, x: &[f64]) -> AffineScanElement<f64> {
        let (h_hat, z) = self.gates(x);
        let a = z.iter().map(|z| 1.0 - z).collect();
        let b = z
            .iter()
            .zip(&h_hat)
            .zip(self.alpha.data())
            .map(|((z, &h), al)| z * sign(h) * al)
            .collect();
        AffineScanElement::new(a, b)
    }
}

impl Parameterized for BmruParams {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        f(&join(prefix, "w_x"), &self.w_x, Constraint::None);
        f(&join(prefix, "b_x"), &self.b_x, Constraint::None);
        f(&join(prefix, "w_beta"), &self.w_beta, Constraint::None);
        f(&join(prefix, "b_beta"), &self.b_beta, Constraint::None);
        f(&join(prefix, "alpha"), &self.alpha, Constraint::Positive);
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        f(&join(prefix, "w_x"), &mut self.w_x, Constraint::None);
        f(&join(prefix, "b_x"), &mut self.b_x, Constraint::None);
        f(&join(prefix, "w_beta"), &mut self.w_beta, Constraint::None);
        f(&join(prefix, "b_beta"), &mut self.b_beta, Constraint::None);
        f(&join(prefix, "alpha"), &mut self.alpha, Constraint::Positive);
    }
}

pub fn init_bmru(d: usize, n: usize, rng: &mut ChaCha8Rng) -> BmruParams {
    let bound = fan_in_bound(n);
    BmruParams {
        w_x: uniform(d, n, bound, rng),
        b_x: uniform(1, d, bound, rng),
        w_beta: uniform(d, n, bound, rng),
        b_beta: uniform(1, d, bound, rng),
        alpha: unit_open_closed(d, rng),
    }
}

/// `z = H(|h_hat| - beta)`, `h = z sign(h_hat) alpha + (1 - z) h_prev`.
pub fn bmru_step(p: &BmruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.n() || h_prev.len() != p.d() {
        return Err(shape_err(
            "bmru_step",
            format!("x {} / h {} for a {}x{} cell", x.len(), h_prev.len(), p.d(), p.n()),
        ));
    }
    Ok(p.element(x).apply(h_prev))
}

pub struct BmruVars<'t> {
    pub w_x: Var<'t>,
    pub b_x: Var<'t>,
    pub w_beta: Var<'t>,
    pub b_beta: Var<'t>,
    pub alpha: Var<'t>,
}

impl BmruParams {
    pub fn bind<'t>(&self, binder: &Binder<'t>, prefix: &str) -> BmruVars<'t> {
        let mut v = Vec::new();
        self.visit(prefix, &mut |name, t, c| v.push(binder.bind(name, t, c)));
        BmruVars {
            w_x: v[0],
            b_x: v[1],
            w_beta: v[2],
            b_beta: v[3],
            alpha: v[4],
        }
    }
}

impl<'t> BmruVars<'t> {
    pub fn candidate(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.linear(self.w_x, Some(self.b_x))
    }

    pub fn scan(
        &self,
        x: Var<'t>,
        h_hat: Var<'t>,
        h0: Var<'t>,
        eps: f64,
        batch: usize,
        mode: ScanMode,
    ) -> Result<Var<'t>> {
        let beta = x.linear(self.w_beta, Some(self.b_beta))?.abs();
        let z = h_hat.abs().sub(beta)?.heaviside();
        let sgn = h_hat.heaviside().scale(2.0).add_scalar(-1.0);
        let mut a = z.one_minus();
        if eps != 0.0 {
            a = a.add_scalar(eps);
        }
        let b = z.mul(sgn)?.mul_row(self.alpha)?;
        Var::affine_scan(a, b, h0, batch, mode)
    }
}
