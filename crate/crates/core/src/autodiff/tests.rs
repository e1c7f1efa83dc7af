use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::Tensor;
use crate::Result;

fn rand_t(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let d = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(rows, cols, d).unwrap()
}

/// Weighted sum so that every output coordinate gets a distinct adjoint.
fn reduce<'t>(y: Var<'t>, seed: u64) -> Result<Var<'t>> {
    let (r, c) = y.shape();
    let w = rand_t(r, c, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(y.mul_const(&w)?.sum())
}

const TOL: f64 = 1e-4;

fn check(name: &str, x: &Tensor, f: impl for<'t> Fn(Var<'t>) -> Result<Var<'t>>) {
    let err = grad_check(|v| reduce(f(v)?, 99), x, 1e-5).unwrap();
    assert!(err < TOL, "{name}: relative gradient error {err}");
}

#[test]
fn unary_ops_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let any = rand_t(3, 4, -2.0, 2.0, &mut rng);
    let pos = rand_t(3, 4, 0.2, 3.0, &mut rng);
    // keep kinks of relu/abs away from the probe
    let off_zero = any.map(|v| if v.abs() < 0.1 { v + 0.3 } else { v });
    check("relu", &off_zero, |v| Ok(v.relu()));
    check("abs", &off_zero, |v| Ok(v.abs()));
    check("sigmoid", &any, |v| Ok(v.sigmoid()));
    check("tanh", &any, |v| Ok(v.tanh()));
    check("exp", &any, |v| Ok(v.exp()));
    check("ln", &pos, |v| Ok(v.ln()));
    check("sqrt", &pos, |v| Ok(v.sqrt()));
    check("softplus", &any, |v| Ok(v.softplus()));
    check("sin", &any, |v| Ok(v.sin()));
    check("cos", &any, |v| Ok(v.cos()));
    check("square", &any, |v| Ok(v.square()));
    check("scale", &any, |v| Ok(v.scale(-1.7)));
    check("add_scalar", &any, |v| Ok(v.add_scalar(0.3)));
    check("neg", &any, |v| Ok(v.neg()));
    check("one_minus", &any, |v| Ok(v.one_minus()));
    check("layer_norm", &any, |v| Ok(v.layer_norm(1e-5)));
    check("slice_cols", &any, |v| v.slice_cols(1, 3));
    check("mean", &any, |v| Ok(v.mean()));
    let c = rand_t(3, 4, -1.0, 1.0, &mut rng);
    check("add_const", &any, |v| v.add_const(&c));
    check("mul_const", &any, |v| v.mul_const(&c));
}

#[test]
fn binary_ops_match_central_differences_in_each_argument() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = rand_t(3, 4, -1.0, 1.0, &mut rng);
    let b = rand_t(3, 4, -1.0, 1.0, &mut rng);
    let row = rand_t(1, 4, -1.0, 1.0, &mut rng);
    let m = rand_t(4, 2, -1.0, 1.0, &mut rng);
    let w = rand_t(5, 4, -1.0, 1.0, &mut rng);
    let bias = rand_t(1, 5, -1.0, 1.0, &mut rng);

    check("add/lhs", &a, |v| v.add(v.tape().constant(b.clone())));
    check("sub/rhs", &b, |v| v.tape().constant(a.clone()).sub(v));
    check("mul/lhs", &a, |v| v.mul(v.tape().constant(b.clone())));
    check("mul/rhs", &b, |v| v.tape().constant(a.clone()).mul(v));
    check("add_row/matrix", &a, |v| v.add_row(v.tape().constant(row.clone())));
    check("add_row/row", &row, |v| v.tape().constant(a.clone()).add_row(v));
    check("mul_row/matrix", &a, |v| v.mul_row(v.tape().constant(row.clone())));
    check("mul_row/row", &row, |v| v.tape().constant(a.clone()).mul_row(v));
    check("matmul/lhs", &a, |v| v.matmul(v.tape().constant(m.clone())));
    check("matmul/rhs", &m, |v| v.tape().constant(a.clone()).matmul(v));
    check("linear/x", &a, |v| {
        let t = v.tape();
        v.linear(t.constant(w.clone()), Some(t.constant(bias.clone())))
    });
    check("linear/w", &w, |v| {
        let t = v.tape();
        t.constant(a.clone()).linear(v, Some(t.constant(bias.clone())))
    });
    check("linear/b", &bias, |v| {
        let t = v.tape();
        t.constant(a.clone()).linear(t.constant(w.clone()), Some(v))
    });
    check("concat_cols", &a, |v| Var::concat_cols(&[v, v.square(), v.slice_cols(2, 3)?]));
}

#[test]
fn cross_entropy_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = rand_t(6, 3, -2.0, 2.0, &mut rng);
    let labels = [0, 2, 1, 1, 0, 2];
    let err = grad_check(|v| v.cross_entropy(&labels), &logits, 1e-5).unwrap();
    assert!(err < TOL, "{err}");
}

#[test]
fn two_layer_mlp_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_t(5, 4, -1.0, 1.0, &mut rng);
    let w1 = rand_t(6, 4, -1.0, 1.0, &mut rng);
    let b1 = rand_t(1, 6, -0.5, 0.5, &mut rng);
    let w2 = rand_t(3, 6, -1.0, 1.0, &mut rng);
    let labels = [0, 1, 2, 1, 0];
    let err = grad_check(
        |v| {
            let t = v.tape();
            let h = t.constant(x.clone()).linear(v, Some(t.constant(b1.clone())))?.tanh();
            h.linear(t.constant(w2.clone()), None)?.cross_entropy(&labels)
        },
        &w1,
        1e-5,
    )
    .unwrap();
    assert!(err < TOL, "{err}");
}

#[test]
fn affine_scan_gradients_in_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (steps, batch, d) = (7, 2, 3);
    let a = rand_t(steps * batch, d, -0.9, 0.9, &mut rng);
    let b = rand_t(steps * batch, d, -1.0, 1.0, &mut rng);
    let h0 = rand_t(batch, d, -1.0, 1.0, &mut rng);
    for mode in [ScanMode::Sequential, ScanMode::Parallel { block: 2 }] {
        check("scan/a", &a, |v| {
            let t = v.tape();
            Var::affine_scan(v, t.constant(b.clone()), t.constant(h0.clone()), batch, mode)
        });
        check("scan/b", &b, |v| {
            let t = v.tape();
            Var::affine_scan(t.constant(a.clone()), v, t.constant(h0.clone()), batch, mode)
        });
        check("scan/h0", &h0, |v| {
            let t = v.tape();
            Var::affine_scan(t.constant(a.clone()), t.constant(b.clone()), v, batch, mode)
        });
    }
}

#[test]
fn complex_scan_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (steps, batch, d) = (6, 2, 3);
    let lr = rand_t(1, d, -0.7, 0.7, &mut rng);
    let li = rand_t(1, d, -0.7, 0.7, &mut rng);
    let ur = rand_t(steps * batch, d, -1.0, 1.0, &mut rng);
    let ui = rand_t(steps * batch, d, -1.0, 1.0, &mut rng);
    let all = [lr.clone(), li.clone(), ur.clone(), ui.clone()];
    for which in 0..4 {
        let x = all[which].clone();
        check("complex_scan", &x, |v| {
            let t = v.tape();
            let mut args: Vec<Var> = all.iter().map(|a| t.constant(a.clone())).collect();
            args[which] = v;
            Var::complex_scan(args[0], args[1], args[2], args[3], batch, ScanMode::Sequential)
        });
    }
}

#[test]
fn complex_scan_parallel_matches_sequential() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tape = Tape::new();
    let c = |r, c, rng: &mut ChaCha8Rng| tape.constant(rand_t(r, c, -0.8, 0.8, rng));
    let (lr, li) = (c(1, 4, &mut rng), c(1, 4, &mut rng));
    let (ur, ui) = (c(40, 4, &mut rng), c(40, 4, &mut rng));
    let s = Var::complex_scan(lr, li, ur, ui, 4, ScanMode::Sequential).unwrap();
    let p = Var::complex_scan(lr, li, ur, ui, 4, ScanMode::Parallel { block: 3 }).unwrap();
    let diff = s.value().sub(&p.value()).unwrap().max_abs();
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn grad_check_simple_cases() {
    let x = Tensor::row(vec![1.0, 2.0, 3.0]);
    let err = grad_check(|v| Ok(v.square().sum()), &x, 1e-5).unwrap();
    assert!(err < 1e-6, "{err}");
    let err = grad_check(|v| Ok(v.sum()), &Tensor::row(vec![-4.0, 0.5, 9.0]), 1e-5).unwrap();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn heaviside_forward_and_surrogate_backward() {
    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::row(vec![0.5, 0.0, -0.3]));
    let y = x.heaviside();
    assert_eq!(y.value().data(), &[1.0, 0.0, 0.0]);
    let mut g = GradStore::new();
    tape.backward(y.sum(), &mut g).unwrap();
    let gx = g.get("x").unwrap().data();
    let pi = std::f64::consts::PI;
    assert!((gx[0] - 1.0 / (1.0 + (pi * 0.5).powi(2))).abs() < 1e-15);
    assert!((gx[0] - 0.2884).abs() < 1e-4);
    assert_eq!(gx[1], 1.0);
    assert!((gx[2] - 1.0 / (1.0 + (pi * 0.3).powi(2))).abs() < 1e-15);
}

#[test]
fn custom_backward_sees_only_the_input() {
    // forward output is discarded by the factor: a constant-output forward
    // still yields the input-dependent factor
    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::row(vec![2.0, -1.0]));
    let y = x.map_custom(|_| 7.0, |x| x * 10.0);
    let mut g = GradStore::new();
    tape.backward(y.sum(), &mut g).unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[20.0, -10.0]);
}

#[test]
fn backward_accumulates_and_zero_resets() {
    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::row(vec![1.0, 2.0]));
    let unused = tape.leaf("unused", Tensor::row(vec![5.0]));
    let _ = unused;
    let loss = x.square().sum();
    let mut g = GradStore::new();
    tape.backward(loss, &mut g).unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[2.0, 4.0]);
    assert_eq!(g.get("unused").unwrap().data(), &[0.0]);
    tape.backward(loss, &mut g).unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[4.0, 8.0]);
    g.zero();
    assert!(g.iter().all(|(_, t)| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn clip_rescales_to_exact_norm() {
    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::row(vec![3.0, 4.0]));
    let mut g = GradStore::new();
    // d/dx of x.(c) with c = (6, 8) gives a gradient of norm 10
    tape.backward(x.mul_const(&Tensor::row(vec![2.0, 2.0])).unwrap().mul(x).unwrap().sum().scale(0.5), &mut g).unwrap();
    assert!((g.global_norm() - 10.0).abs() < 1e-12);
    let pre = g.clip_global_norm(1.0);
    assert!((pre - 10.0).abs() < 1e-12);
    assert!((g.global_norm() - 1.0).abs() < 1e-15);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::row(vec![1.0, 2.0]));
    assert!(tape.backward(x.relu(), &mut GradStore::new()).is_err());
}
