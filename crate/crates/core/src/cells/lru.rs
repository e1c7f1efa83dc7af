use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scan::AffineScanElement;
use crate::autodiff::{ScanMode, Var};
use crate::error::{shape_err, Result};
use crate::params::{join, Binder, Constraint, Parameterized, Visit, VisitMut};
use crate::tensor::{dot, Tensor};

/// Diagonal complex linear recurrent unit with eigenvalues
/// `lambda = exp(-exp(nu) + i exp(theta))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LruParams {
    pub nu: Tensor,
    pub theta: Tensor,
    pub b_re: Tensor,
    pub b_im: Tensor,
    pub c_re: Tensor,
    pub c_im: Tensor,
    pub d_skip: Tensor,
}

impl LruParams {
    pub fn d(&self) -> usize {
        self.nu.len()
    }

    pub fn m(&self) -> usize {
        self.b_re.cols()
    }

    pub fn d_out(&self) -> usize {
        self.c_re.rows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.nu
            .data()
            .iter()
            .zip(self.theta.data())
            .map(|(&nu, &th)| Complex64::from_polar((-nu.exp()).exp(), th.exp()))
            .collect()
    }

    /// `B u` as complex values.
    pub fn input(&self, u: &[f64]) -> Vec<Complex64> {
        (0..self.d())
            .map(|i| Complex64::new(dot(self.b_re.row_slice(i), u), dot(self.b_im.row_slice(i), u)))
            .collect()
    }

    /// `Re(C x) + D u`.
    pub fn output(&self, x: &[Complex64], u: &[f64]) -> Vec<f64> {
        (0..self.d_out())
            .map(|o| {
                let cr = self.c_re.row_slice(o);
                let ci = self.c_im.row_slice(o);
                let re: f64 = x.iter().enumerate().map(|(j, x)| cr[j] * x.re - ci[j] * x.im).sum();
                re + dot(self.d_skip.row_slice(o), u)
            })
            .collect()
    }

    pub fn element(&self, lambda: &[Complex64], u: &[f64]) -> AffineScanElement<Complex64> {
        let bu = self.input(u);
        let b = bu
            .iter()
            .zip(lambda)
            .map(|(v, l)| v * (1.0 - l.norm_sqr()).sqrt())
            .collect();
        AffineScanElement::new(lambda.to_vec(), b)
    }
}

impl Parameterized for LruParams {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        for (name, t) in [
            ("nu", &self.nu),
            ("theta", &self.theta),
            ("b_re", &self.b_re),
            ("b_im", &self.b_im),
            ("c_re", &self.c_re),
            ("c_im", &self.c_im),
            ("d_skip", &self.d_skip),
        ] {
            f(&join(prefix, name), t, Constraint::None);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        for (name, t) in [
            ("nu", &mut self.nu),
            ("theta", &mut self.theta),
            ("b_re", &mut self.b_re),
            ("b_im", &mut self.b_im),
            ("c_re", &mut self.c_re),
            ("c_im", &mut self.c_im),
            ("d_skip", &mut self.d_skip),
        ] {
            f(&join(prefix, name), t, Constraint::None);
        }
    }
}

fn normal(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| { let z: f64 = StandardNormal.sample(rng); std * z })
        .collect::<Vec<f64>>();
    Tensor::from_vec(rows, cols, data).expect("sized by construction")
}

/// Eigenvalue magnitudes uniform in `[0.9, 0.999]`, phases uniform in
/// `(0, 2 pi]`; Glorot-style Gaussian projections.
pub fn init_lru(d: usize, m: usize, d_out: usize, rng: &mut ChaCha8Rng) -> LruParams {
    let mut nu = Vec::with_capacity(d);
    let mut theta = Vec::with_capacity(d);
    for _ in 0..d {
        let mag: f64 = rng.random_range(0.9..=0.999);
        let phase = TAU * (1.0 - rng.random::<f64>());
        nu.push((-mag.ln()).ln());
        theta.push(phase.ln());
    }
    let b_std = 1.0 / (2.0 * m.max(1) as f64).sqrt();
    LruParams {
        nu: Tensor::row(nu),
        theta: Tensor::row(theta),
        b_re: normal(d, m, b_std, rng),
        b_im: normal(d, m, b_std, rng),
        c_re: normal(d_out, d, 1.0 / (d as f64).sqrt(), rng),
        c_im: normal(d_out, d, 1.0 / (d as f64).sqrt(), rng),
        d_skip: normal(d_out, m, 1.0 / (m.max(1) as f64).sqrt(), rng),
    }
}

/// One frame with the parameterized eigenvalues. Returns `(x_t, y_t)`.
pub fn lru_step(p: &LruParams, u: &[f64], x_prev: &[Complex64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
    lru_step_with_lambda(p, &p.eigenvalues(), u, x_prev)
}

/// Same recurrence with eigenvalues given directly, for values such as
/// `lambda = 0` that the `nu` form cannot reach.
pub fn lru_step_with_lambda(
    p: &LruParams,
    lambda: &[Complex64],
    u: &[f64],
    x_prev: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if u.len() != p.m() || x_prev.len() != p.d() || lambda.len() != p.d() {
        return Err(shape_err(
            "lru_step",
            format!("u {} / x {} / lambda {} for d={} m={}", u.len(), x_prev.len(), lambda.len(), p.d(), p.m()),
        ));
    }
    let x = p.element(lambda, u).apply(x_prev);
    let y = p.output(&x, u);
    Ok((x, y))
}

pub struct LruVars<'t> {
    pub lam_re: Var<'t>,
    pub lam_im: Var<'t>,
    pub gamma: Var<'t>,
    pub b_re: Var<'t>,
    pub b_im: Var<'t>,
    pub c_re: Var<'t>,
    pub c_im: Var<'t>,
    pub d_skip: Var<'t>,
}

impl LruParams {
    pub fn bind<'t>(&self, binder: &Binder<'t>, prefix: &str) -> LruVars<'t> {
        let mut v = Vec::new();
        self.visit(prefix, &mut |name, t, c| v.push(binder.bind(name, t, c)));
        let mag = v[0].exp().neg().exp();
        let phase = v[1].exp();
        let gamma = mag.square().one_minus().sqrt();
        LruVars {
            lam_re: mag.mul(phase.cos()).expect("same shape"),
            lam_im: mag.mul(phase.sin()).expect("same shape"),
            gamma,
            b_re: v[2],
            b_im: v[3],
            c_re: v[4],
            c_im: v[5],
            d_skip: v[6],
        }
    }
}

impl<'t> LruVars<'t> {
    /// Real part of the scaled drive `gamma B u`, reported as the candidate.
    pub fn drive(&self, u: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
        let re = u.linear(self.b_re, None)?.mul_row(self.gamma)?;
        let im = u.linear(self.b_im, None)?.mul_row(self.gamma)?;
        Ok((re, im))
    }

    /// Returns `(y, x)` where `x` packs real then imaginary state parts.
    /// `extra` (same layout as `x`) is added to the drive.
    pub fn scan(
        &self,
        u: Var<'t>,
        drive: (Var<'t>, Var<'t>),
        extra: Option<&Tensor>,
        batch: usize,
        mode: ScanMode,
    ) -> Result<(Var<'t>, Var<'t>)> {
        let (mut re, mut im) = drive;
        if let Some(e) = extra {
            let d = re.shape().1;
            let tape = u.tape();
            let e = tape.constant(e.clone());
            re = re.add(e.slice_cols(0, d)?)?;
            im = im.add(e.slice_cols(d, 2 * d)?)?;
        }
        let x = Var::complex_scan(self.lam_re, self.lam_im, re, im, batch, mode)?;
        let d = re.shape().1;
        let x_re = x.slice_cols(0, d)?;
        let x_im = x.slice_cols(d, 2 * d)?;
        let y = x_re
            .linear(self.c_re, None)?
            .sub(x_im.linear(self.c_im, None)?)?
            .add(u.linear(self.d_skip, None)?)?;
        Ok((y, x))
    }
}
