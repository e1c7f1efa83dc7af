use super::tape::{GradStore, Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Largest relative disagreement between the tape gradient of a scalar
/// function and central differences, over all coordinates of `x`:
/// `|analytic - numeric| / (|numeric| + 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(Var<'t>) -> Result<Var<'t>>,
{
    let eval = |v: &Tensor| -> Result<f64> {
        let tape = Tape::new();
        let out = f(tape.constant(v.clone()))?;
        let y = out.value().data()[0];
        Ok(y)
    };

    let tape = Tape::new();
    let leaf = tape.leaf("x", x.clone());
    let loss = f(leaf)?;
    let mut grads = GradStore::new();
    tape.backward(loss, &mut grads)?;
    let analytic = grads.get("x").cloned().unwrap_or_else(|| x.map(|_| 0.0));

    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic.data()[i] - numeric).abs() / (numeric.abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
