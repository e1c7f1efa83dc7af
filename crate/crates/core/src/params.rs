//! Named parameter traversal shared by the optimizer, quantizer, checkpoint
//! writer and circuit compiler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

/// How the optimizer sees a stored value. Positive tensors hold the
/// effective (post-softplus) value; gradients arrive for the softplus
/// pre-image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    None,
    Positive,
}

pub type Visit<'a> = &'a mut dyn FnMut(&str, &Tensor, Constraint);
pub type VisitMut<'a> = &'a mut dyn FnMut(&str, &mut Tensor, Constraint);

pub trait Parameterized {
    fn visit(&self, prefix: &str, f: Visit<'_>);
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>);

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t, _| n += t.len());
        n
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t, _| out.push((name.to_string(), t.clone())));
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Puts stored parameters on a tape. In training mode each becomes a named
/// leaf (positive ones through softplus); otherwise a constant.
#[derive(Clone, Copy)]
pub struct Binder<'t> {
    pub tape: &'t Tape,
    pub train: bool,
}

impl<'t> Binder<'t> {
    pub fn new(tape: &'t Tape, train: bool) -> Self {
        Self { tape, train }
    }

    pub fn bind(&self, name: &str, value: &Tensor, constraint: Constraint) -> Var<'t> {
        if !self.train {
            return self.tape.constant(value.clone());
        }
        match constraint {
            Constraint::None => self.tape.leaf(name, value.clone()),
            Constraint::Positive => self
                .tape
                .leaf(name, value.map(crate::autodiff::softplus_inv))
                .softplus(),
        }
    }
}

/// Dense layer `y = x W^T + b`, `W` stored `out x in`, `b` as `1 x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn new(w: Tensor, b: Tensor) -> Self {
        Self { w, b }
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            w: Tensor::zeros(n_out, n_in),
            b: Tensor::zeros(1, n_out),
        }
    }

    /// Weights and bias uniform in `+-1/sqrt(n_in)`.
    pub fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: uniform(n_out, n_in, fan_in_bound(n_in), rng),
            b: uniform(1, n_out, fan_in_bound(n_in), rng),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.cols()
    }

    pub fn n_out(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_out())
            .map(|o| crate::tensor::dot(self.w.row_slice(o), x) + self.b.data()[o])
            .collect()
    }

    pub fn forward<'t>(&self, binder: &Binder<'t>, prefix: &str, x: Var<'t>) -> crate::Result<Var<'t>> {
        let w = binder.bind(&join(prefix, "w"), &self.w, Constraint::None);
        let b = binder.bind(&join(prefix, "b"), &self.b, Constraint::None);
        x.linear(w, Some(b))
    }
}

impl Parameterized for Linear {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        f(&join(prefix, "w"), &self.w, Constraint::None);
        f(&join(prefix, "b"), &self.b, Constraint::None);
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        f(&join(prefix, "w"), &mut self.w, Constraint::None);
        f(&join(prefix, "b"), &mut self.b, Constraint::None);
    }
}

pub(crate) fn fan_in_bound(n: usize) -> f64 {
    1.0 / (n.max(1) as f64).sqrt()
}

pub(crate) fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized by construction")
}

/// Uniform on `(0, 1]`.
pub(crate) fn unit_open_closed(cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::row((0..cols).map(|_| 1.0 - rng.random::<f64>()).collect())
}
