use std::f64::consts::PI;

use num_complex::Complex64;

use super::tape::{BackwardFn, Var};
use crate::cells::scan::{self, AffineScanElement};
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Backward stand-in for the Heaviside step: `1 / (1 + (pi x)^2)`.
pub fn heaviside_surrogate(x: f64) -> f64 {
    1.0 / (1.0 + (PI * x).powi(2))
}

/// Heaviside step with `H(0) = 0`: the gate opens only on strict excess.
pub(crate) fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// How the affine-scan op evaluates its forward pass. Backward is always the
/// reverse adjoint recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    Sequential,
    Parallel { block: usize },
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

fn bw(f: impl Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Option<Tensor>> + 'static) -> BackwardFn {
    Box::new(f)
}

impl<'t> Var<'t> {
    fn unary(
        self,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'t> {
        let x = self.value();
        let y = x.map(f);
        self.tape.op(
            y,
            &[self],
            bw(move |g, p, y| {
                let d = p[0]
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(g.data())
                    .map(|((&x, &y), &g)| g * df(x, y))
                    .collect();
                vec![Some(Tensor::new(g.shape().to_vec(), d).unwrap())]
            }),
        )
    }

    /// Element-wise op with an arbitrary backward factor. The factor sees
    /// only the forward input, never the output.
    pub fn map_custom(
        self,
        forward: impl Fn(f64) -> f64,
        backward: impl Fn(f64) -> f64 + 'static,
    ) -> Var<'t> {
        self.unary(forward, move |x, _| backward(x))
    }

    /// `H(x)` forward, surrogate `1/(1+(pi x)^2)` backward.
    pub fn heaviside(self) -> Var<'t> {
        self.map_custom(heaviside, heaviside_surrogate)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(|x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(f64::exp, |_, y| y)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(f64::ln, |x, _| 1.0 / x)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(softplus, |x, _| sigmoid(x))
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(f64::sin, |x, _| x.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(f64::cos, |x, _| -x.sin())
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(f64::abs, |x, _| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
    }

    pub fn square(self) -> Var<'t> {
        self.unary(|x| x * x, |x, _| 2.0 * x)
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        self.unary(move |x| x * k, move |_, _| k)
    }

    pub fn add_scalar(self, k: f64) -> Var<'t> {
        self.unary(move |x| x + k, |_, _| 1.0)
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    /// `1 - x`, the complement used throughout the gate algebra.
    pub fn one_minus(self) -> Var<'t> {
        self.unary(|x| 1.0 - x, |_, _| -1.0)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let y = a.add(&b)?;
        Ok(self
            .tape
            .op(y, &[self, other], bw(|g, _, _| vec![Some(g.clone()), Some(g.clone())])))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let y = a.sub(&b)?;
        Ok(self
            .tape
            .op(y, &[self, other], bw(|g, _, _| vec![Some(g.clone()), Some(g.scale(-1.0))])))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let y = a.mul(&b)?;
        Ok(self.tape.op(
            y,
            &[self, other],
            bw(|g, p, _| vec![Some(g.mul(p[1]).unwrap()), Some(g.mul(p[0]).unwrap())]),
        ))
    }

    /// Adds a fixed tensor (noise, offsets) of the same shape.
    pub fn add_const(self, c: &Tensor) -> Result<Var<'t>> {
        let y = self.value().add(c)?;
        Ok(self.tape.op(y, &[self], bw(|g, _, _| vec![Some(g.clone())])))
    }

    /// Multiplies by a fixed tensor (dropout masks) of the same shape.
    pub fn mul_const(self, c: &Tensor) -> Result<Var<'t>> {
        let y = self.value().mul(c)?;
        let c = c.clone();
        Ok(self
            .tape
            .op(y, &[self], bw(move |g, _, _| vec![Some(g.mul(&c).unwrap())])))
    }

    /// Matrix plus `1 x cols` row vector, the only broadcast supported.
    pub fn add_row(self, bias: Var<'t>) -> Result<Var<'t>> {
        let y = self.value().add_row(&bias.value())?;
        Ok(self.tape.op(
            y,
            &[self, bias],
            bw(|g, _, _| vec![Some(g.clone()), Some(g.sum_rows())]),
        ))
    }

    /// Matrix times `1 x cols` row vector, element-wise per row.
    pub fn mul_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let (x, r) = (self.value(), row.value());
        if r.len() != x.cols() {
            return Err(shape_err("mul_row", format!("{:?} * row of {}", x.shape(), r.len())));
        }
        let c = x.cols();
        let data: Vec<f64> = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * r.data()[i % c])
            .collect();
        let y = Tensor::from_vec(x.rows(), c, data)?;
        Ok(self.tape.op(
            y,
            &[self, row],
            bw(move |g, p, _| {
                let (x, r) = (p[0], p[1]);
                let gx: Vec<f64> = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &gv)| gv * r.data()[i % c])
                    .collect();
                let gr = g.mul(x).unwrap().sum_rows();
                vec![Some(Tensor::from_vec(x.rows(), c, gx).unwrap()), Some(gr)]
            }),
        ))
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let y = self.value().matmul(&other.value())?;
        Ok(self.tape.op(
            y,
            &[self, other],
            bw(|g, p, _| {
                let ga = g.matmul_t(p[1]).unwrap();
                let gb = p[0].t_matmul(g).unwrap();
                vec![Some(ga), Some(gb)]
            }),
        ))
    }

    /// `x . W^T + b` with `W` stored `out x in`.
    pub fn linear(self, weight: Var<'t>, bias: Option<Var<'t>>) -> Result<Var<'t>> {
        let y = self.value().matmul_t(&weight.value())?;
        let y = self.tape.op(
            y,
            &[self, weight],
            bw(|g, p, _| {
                let gx = g.matmul(p[1]).unwrap();
                let gw = g.t_matmul(p[0]).unwrap();
                vec![Some(gx), Some(gw)]
            }),
        );
        match bias {
            Some(b) => y.add_row(b),
            None => Ok(y),
        }
    }

    pub fn sum(self) -> Var<'t> {
        let y = Tensor::scalar(self.value().sum());
        self.tape.op(
            y,
            &[self],
            bw(|g, p, _| {
                let gv = g.data()[0];
                vec![Some(p[0].map(|_| gv))]
            }),
        )
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("concat_cols", "no inputs"))?;
        let vals: Vec<_> = parts.iter().map(Var::value).collect();
        let rows = vals[0].rows();
        if vals.iter().any(|v| v.rows() != rows) {
            return Err(shape_err("concat_cols", "row counts differ"));
        }
        let widths: Vec<usize> = vals.iter().map(|v| v.cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &vals {
                data.extend_from_slice(v.row_slice(r));
            }
        }
        let y = Tensor::from_vec(rows, total, data)?;
        Ok(first.tape.op(
            y,
            parts,
            bw(move |g, _, _| {
                let mut out = Vec::with_capacity(widths.len());
                let mut off = 0;
                for &w in &widths {
                    let mut d = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        d.extend_from_slice(&g.row_slice(r)[off..off + w]);
                    }
                    out.push(Some(Tensor::from_vec(rows, w, d).unwrap()));
                    off += w;
                }
                out
            }),
        ))
    }

    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        if start > end || end > cols {
            return Err(shape_err("slice_cols", format!("{start}..{end} of {cols} columns")));
        }
        let w = end - start;
        let mut data = Vec::with_capacity(rows * w);
        for r in 0..rows {
            data.extend_from_slice(&x.row_slice(r)[start..end]);
        }
        let y = Tensor::from_vec(rows, w, data)?;
        Ok(self.tape.op(
            y,
            &[self],
            bw(move |g, _, _| {
                let mut full = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..w {
                        full.set(r, start + c, g.get(r, c));
                    }
                }
                vec![Some(full)]
            }),
        ))
    }

    /// Per-row standardisation `(x - mean) / sqrt(var + eps)`, no affine part.
    pub fn layer_norm(self, eps: f64) -> Var<'t> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        let n = cols as f64;
        let mut y = vec![0.0; rows * cols];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = x.row_slice(r);
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..cols {
                y[r * cols + c] = (row[c] - mu) * is;
            }
        }
        let y = Tensor::from_vec(rows, cols, y).unwrap();
        self.tape.op(
            y,
            &[self],
            bw(move |g, _, y| {
                let mut out = vec![0.0; rows * cols];
                for r in 0..rows {
                    let gr = g.row_slice(r);
                    let yr = y.row_slice(r);
                    let mg = gr.iter().sum::<f64>() / n;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for c in 0..cols {
                        out[r * cols + c] = inv_std[r] * (gr[c] - mg - yr[c] * mgy);
                    }
                }
                vec![Some(Tensor::from_vec(rows, cols, out).unwrap())]
            }),
        )
    }

    /// Mean over rows of `-log softmax(row)[label]`.
    pub fn cross_entropy(self, labels: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let (rows, cols) = (x.rows(), x.cols());
        if labels.len() != rows {
            return Err(shape_err(
                "cross_entropy",
                format!("{rows} rows but {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cols) {
            return Err(shape_err("cross_entropy", format!("label {bad} >= {cols} classes")));
        }
        let mut probs = vec![0.0; rows * cols];
        let mut loss = 0.0;
        for r in 0..rows {
            let row = x.row_slice(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + z.ln();
            loss += lse - row[labels[r]];
            for c in 0..cols {
                probs[r * cols + c] = (row[c] - lse).exp();
            }
        }
        let labels = labels.to_vec();
        let n = rows as f64;
        Ok(self.tape.op(
            Tensor::scalar(loss / n),
            &[self],
            bw(move |g, _, _| {
                let gv = g.data()[0] / n;
                let mut d = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    d[r * cols + l] -= 1.0;
                }
                for v in &mut d {
                    *v *= gv;
                }
                vec![Some(Tensor::from_vec(rows, cols, d).unwrap())]
            }),
        ))
    }

    /// Element-wise affine recurrence over time-major rows:
    /// `H[t] = A[t] * H[t-1] + B[t]`, `H[-1] = h0`. `a` and `b` are
    /// `(T*batch) x d`, `h0` is `batch x d`.
    pub fn affine_scan(
        a: Var<'t>,
        b: Var<'t>,
        h0: Var<'t>,
        batch: usize,
        mode: ScanMode,
    ) -> Result<Var<'t>> {
        let (av, bv, hv) = (a.value(), b.value(), h0.value());
        same_shape("affine_scan", &av, &bv)?;
        let width = batch * av.cols();
        if hv.len() != width || av.len() % width.max(1) != 0 {
            return Err(shape_err(
                "affine_scan",
                format!("a {:?}, h0 {:?}, batch {batch}", av.shape(), hv.shape()),
            ));
        }
        let steps = av.len() / width.max(1);
        let out = match mode {
            ScanMode::Sequential => {
                let mut out = Vec::with_capacity(av.len());
                let mut h = hv.data().to_vec();
                for t in 0..steps {
                    let span = t * width..(t + 1) * width;
                    for ((h, &a), &b) in h.iter_mut().zip(&av.data()[span.clone()]).zip(&bv.data()[span]) {
                        *h = a * *h + b;
                    }
                    out.extend_from_slice(&h);
                }
                out
            }
            ScanMode::Parallel { block } => {
                let elems: Vec<_> = (0..steps)
                    .map(|t| {
                        let span = t * width..(t + 1) * width;
                        AffineScanElement::new(av.data()[span.clone()].to_vec(), bv.data()[span].to_vec())
                    })
                    .collect();
                scan::parallel(&elems, hv.data(), block).concat()
            }
        };
        let y = Tensor::from_vec(av.rows(), av.cols(), out)?;
        Ok(a.tape.op(
            y,
            &[a, b, h0],
            bw(move |g, p, y| {
                let (a, h0) = (p[0].data(), p[2].data());
                let (gd, yd) = (g.data(), y.data());
                let mut ga = vec![0.0; a.len()];
                let mut gb = vec![0.0; a.len()];
                let mut lam = vec![0.0; width];
                for t in (0..steps).rev() {
                    let base = t * width;
                    for j in 0..width {
                        let next = if t + 1 < steps { a[base + width + j] * lam[j] } else { 0.0 };
                        lam[j] = gd[base + j] + next;
                        let prev = if t == 0 { h0[j] } else { yd[base - width + j] };
                        ga[base + j] = lam[j] * prev;
                        gb[base + j] = lam[j];
                    }
                }
                let gh0: Vec<f64> = (0..width).map(|j| a[j] * lam[j]).collect();
                let shape = p[0].shape().to_vec();
                vec![
                    Some(Tensor::new(shape.clone(), ga).unwrap()),
                    Some(Tensor::new(shape, gb).unwrap()),
                    Some(Tensor::new(p[2].shape().to_vec(), gh0).unwrap()),
                ]
            }),
        ))
    }

    /// Complex diagonal recurrence `x_t = lambda * x_{t-1} + u_t` from a zero
    /// state. `lam_re`/`lam_im` are `1 x d`; `u_re`/`u_im` are `(T*batch) x d`.
    /// Output is `(T*batch) x 2d`, real parts then imaginary parts.
    pub fn complex_scan(
        lam_re: Var<'t>,
        lam_im: Var<'t>,
        u_re: Var<'t>,
        u_im: Var<'t>,
        batch: usize,
        mode: ScanMode,
    ) -> Result<Var<'t>> {
        let (lr, li, ur, ui) = (lam_re.value(), lam_im.value(), u_re.value(), u_im.value());
        same_shape("complex_scan", &ur, &ui)?;
        same_shape("complex_scan", &lr, &li)?;
        let d = ur.cols();
        if lr.len() != d {
            return Err(shape_err("complex_scan", format!("lambda of {} for width {d}", lr.len())));
        }
        let width = batch * d;
        if width == 0 || ur.len() % width != 0 {
            return Err(shape_err("complex_scan", format!("{:?} with batch {batch}", ur.shape())));
        }
        let steps = ur.len() / width;
        let lam: Vec<Complex64> = (0..width)
            .map(|j| Complex64::new(lr.data()[j % d], li.data()[j % d]))
            .collect();
        let u: Vec<Complex64> = ur
            .data()
            .iter()
            .zip(ui.data())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let xs: Vec<Complex64> = match mode {
            ScanMode::Sequential => {
                let mut out = Vec::with_capacity(u.len());
                let mut h = vec![Complex64::new(0.0, 0.0); width];
                for t in 0..steps {
                    for j in 0..width {
                        h[j] = lam[j] * h[j] + u[t * width + j];
                    }
                    out.extend_from_slice(&h);
                }
                out
            }
            ScanMode::Parallel { block } => {
                let elems: Vec<_> = (0..steps)
                    .map(|t| AffineScanElement::new(lam.clone(), u[t * width..(t + 1) * width].to_vec()))
                    .collect();
                let h0 = vec![Complex64::new(0.0, 0.0); width];
                scan::parallel(&elems, &h0, block).concat()
            }
        };
        let rows = ur.rows();
        let mut data = Vec::with_capacity(rows * 2 * d);
        for r in 0..rows {
            data.extend(xs[r * d..(r + 1) * d].iter().map(|c| c.re));
            data.extend(xs[r * d..(r + 1) * d].iter().map(|c| c.im));
        }
        let y = Tensor::from_vec(rows, 2 * d, data)?;
        Ok(lam_re.tape.op(
            y,
            &[lam_re, lam_im, u_re, u_im],
            bw(move |g, _, _| {
                let grad_at = |r: usize, c: usize| Complex64::new(g.get(r, c), g.get(r, d + c));
                let mut lam_acc = vec![Complex64::new(0.0, 0.0); d];
                let mut gu = vec![Complex64::new(0.0, 0.0); xs.len()];
                let mut adj = vec![Complex64::new(0.0, 0.0); width];
                for t in (0..steps).rev() {
                    for j in 0..width {
                        let (b, c) = (j / d, j % d);
                        let row = t * batch + b;
                        let carried = if t + 1 < steps { lam[j].conj() * adj[j] } else { Complex64::new(0.0, 0.0) };
                        adj[j] = grad_at(row, c) + carried;
                        gu[t * width + j] = adj[j];
                        if t > 0 {
                            lam_acc[c] += adj[j] * xs[(t - 1) * width + j].conj();
                        }
                    }
                }
                let re = |v: &[Complex64]| v.iter().map(|c| c.re).collect::<Vec<_>>();
                let im = |v: &[Complex64]| v.iter().map(|c| c.im).collect::<Vec<_>>();
                vec![
                    Some(Tensor::row(re(&lam_acc))),
                    Some(Tensor::row(im(&lam_acc))),
                    Some(Tensor::from_vec(rows, d, re(&gu)).unwrap()),
                    Some(Tensor::from_vec(rows, d, im(&gu)).unwrap()),
                ]
            }),
        ))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub(crate) fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
