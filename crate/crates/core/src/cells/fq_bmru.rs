use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scan::AffineScanElement;
use crate::autodiff::{heaviside, ScanMode, Var};
use crate::error::{shape_err, Error, Result};
use crate::params::{fan_in_bound, join, uniform, unit_open_closed, Binder, Constraint, Parameterized, Visit, VisitMut};
use crate::tensor::{dot, Tensor};

/// First-quadrant bistable cell. Thresholds and gain are stored as their
/// effective positive values; `beta_hi = beta_lo + delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FqBmruParams {
    pub w_x: Tensor,
    pub b_x: Tensor,
    pub beta_lo: Tensor,
    pub delta: Tensor,
    pub alpha: Tensor,
}

impl FqBmruParams {
    pub fn d(&self) -> usize {
        self.w_x.rows()
    }

    pub fn n(&self) -> usize {
        self.w_x.cols()
    }

    pub fn beta_hi(&self) -> Vec<f64> {
        self.beta_lo
            .data()
            .iter()
            .zip(self.delta.data())
            .map(|(l, d)| l + d)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        for (name, t) in [("b_x", &self.b_x), ("beta_lo", &self.beta_lo), ("delta", &self.delta), ("alpha", &self.alpha)] {
            if t.len() != d {
                return Err(shape_err("fq_bmru", format!("{name} has {} entries, expected {d}", t.len())));
            }
        }
        for (name, t) in [("beta_lo", &self.beta_lo), ("delta", &self.delta), ("alpha", &self.alpha)] {
            if let Some(i) = t.data().iter().position(|&v| !(v > 0.0)) {
                return Err(Error::Precondition(format!("{name}[{i}] = {} is not positive", t.data()[i])));
            }
        }
        Ok(())
    }

    /// `ReLU(W_x x + b_x)` for one frame.
    pub fn candidate(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d())
            .map(|i| (dot(self.w_x.row_slice(i), x) + self.b_x.data()[i]).max(0.0))
            .collect()
    }

    /// Gate pair for given candidates: `a = (1 - z_lo)(1 - z_hi) + eps`,
    /// `b = z_hi alpha`.
    pub fn element(&self, h_hat: &[f64], eps: f64) -> AffineScanElement<f64> {
        let mut a = Vec::with_capacity(h_hat.len());
        let mut b = Vec::with_capacity(h_hat.len());
        for (i, &h) in h_hat.iter().enumerate() {
            let lo = self.beta_lo.data()[i];
            let hi = lo + self.delta.data()[i];
            let z_lo = heaviside(lo - h);
            let z_hi = heaviside(h - hi);
            a.push((1.0 - z_lo) * (1.0 - z_hi) + eps);
            b.push(z_hi * self.alpha.data()[i]);
        }
        AffineScanElement::new(a, b)
    }
}

impl Parameterized for FqBmruParams {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        f(&join(prefix, "w_x"), &self.w_x, Constraint::None);
        f(&join(prefix, "b_x"), &self.b_x, Constraint::None);
        f(&join(prefix, "beta_lo"), &self.beta_lo, Constraint::Positive);
        f(&join(prefix, "delta"), &self.delta, Constraint::Positive);
        f(&join(prefix, "alpha"), &self.alpha, Constraint::Positive);
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        f(&join(prefix, "w_x"), &mut self.w_x, Constraint::None);
        f(&join(prefix, "b_x"), &mut self.b_x, Constraint::None);
        f(&join(prefix, "beta_lo"), &mut self.beta_lo, Constraint::Positive);
        f(&join(prefix, "delta"), &mut self.delta, Constraint::Positive);
        f(&join(prefix, "alpha"), &mut self.alpha, Constraint::Positive);
    }
}

/// Weights uniform in `+-1/sqrt(n)`, thresholds and gain uniform in `(0, 1]`.
pub fn init_fq_bmru(d: usize, n: usize, rng: &mut ChaCha8Rng) -> FqBmruParams {
    let bound = fan_in_bound(n);
    FqBmruParams {
        w_x: uniform(d, n, bound, rng),
        b_x: uniform(1, d, bound, rng),
        alpha: unit_open_closed(d, rng),
        beta_lo: unit_open_closed(d, rng),
        delta: unit_open_closed(d, rng),
    }
}

/// One frame. Returns `(h_t, h_hat)`.
pub fn fq_bmru_step(p: &FqBmruParams, x: &[f64], h_prev: &[f64], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != p.n() || h_prev.len() != p.d() {
        return Err(shape_err(
            "fq_bmru_step",
            format!("x {} / h {} for a {}x{} cell", x.len(), h_prev.len(), p.d(), p.n()),
        ));
    }
    if eps == 0.0 {
        if let Some(i) = h_prev.iter().position(|&v| v < 0.0) {
            return Err(Error::Precondition(format!("h_prev[{i}] = {} is negative", h_prev[i])));
        }
    }
    let h_hat = p.candidate(x);
    let h = p.element(&h_hat, eps).apply(h_prev);
    Ok((h, h_hat))
}

/// Tape-side tensors of one cell, bound once per forward pass.
pub struct FqBmruVars<'t> {
    pub w_x: Var<'t>,
    pub b_x: Var<'t>,
    pub beta_lo: Var<'t>,
    pub beta_hi: Var<'t>,
    pub alpha: Var<'t>,
}

impl FqBmruParams {
    pub fn bind<'t>(&self, binder: &Binder<'t>, prefix: &str) -> Result<FqBmruVars<'t>> {
        let mut v = Vec::new();
        self.visit(prefix, &mut |name, t, c| v.push(binder.bind(name, t, c)));
        let beta_hi = v[2].add(v[3])?;
        Ok(FqBmruVars {
            w_x: v[0],
            b_x: v[1],
            beta_lo: v[2],
            beta_hi,
            alpha: v[4],
        })
    }
}

impl<'t> FqBmruVars<'t> {
    /// Candidate `ReLU(W_x x + b_x)` for time-major rows.
    pub fn candidate(&self, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.linear(self.w_x, Some(self.b_x))?.relu())
    }

    /// States for time-major rows given candidates (possibly perturbed).
    pub fn scan(&self, h_hat: Var<'t>, h0: Var<'t>, eps: f64, batch: usize, mode: ScanMode) -> Result<Var<'t>> {
        self.scan_with_gate(h_hat, h0, eps, batch, mode, Var::heaviside)
    }

    /// [`Self::scan`] with the step function swapped out, e.g. for a smooth
    /// stand-in when checking gradients.
    pub fn scan_with_gate(
        &self,
        h_hat: Var<'t>,
        h0: Var<'t>,
        eps: f64,
        batch: usize,
        mode: ScanMode,
        gate: impl Fn(Var<'t>) -> Var<'t>,
    ) -> Result<Var<'t>> {
        let z_lo = gate(h_hat.neg().add_row(self.beta_lo)?);
        let z_hi = gate(h_hat.add_row(self.beta_hi.neg())?);
        let mut a = z_lo.one_minus().mul(z_hi.one_minus())?;
        if eps != 0.0 {
            a = a.add_scalar(eps);
        }
        let b = z_hi.mul_row(self.alpha)?;
        Var::affine_scan(a, b, h0, batch, mode)
    }
}
