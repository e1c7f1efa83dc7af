//! Network skeletons around the cells: the circuit-compatible hardware
//! backbone, the richer software backbone, and sequence pooling.

mod arch;
mod hardware;
mod layer;
mod pe;
mod pooling;
mod unipolar;
mod software;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use arch::{AnyModel, ArchSpec};
pub use hardware::{HardwareBackbone, HwLayer, HwTrace};
pub use pe::sinusoidal_pe;
pub use pooling::{majority_vote, vote_counts, vote_margin, PoolingRule};
pub use unipolar::{reparameterize_unipolar, BipolarBmruNet, UnipolarBmruNet};
pub use software::{Mlp, NormAffine, SoftwareBackbone, SwBlock};

use crate::autodiff::{ScanMode, Tape, Var};
use crate::cells::{CellKind, DEFAULT_BLOCK};
use crate::error::{shape_err, Result};
use crate::params::{Binder, Parameterized};
use crate::tensor::Tensor;

/// Where training-mode dropout is applied inside a recurrent layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutSite {
    /// On the cell candidate, before thresholding.
    Candidate,
    /// On the signal entering the cell.
    CellInput,
    Off,
}

/// Initial recurrent state of bistable cells during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitState {
    /// Uniform draw binarized at one half: each coordinate starts off or at alpha.
    Random,
    /// All off, as the circuit after reset.
    Zero,
}

/// Additive noise source for named stages: given the stage name and the
/// shape of its signal, returns the noise to add, if any.
pub type NoiseHook<'h> = &'h mut dyn FnMut(&str, usize, usize) -> Option<Tensor>;

/// Per-call forward settings plus the probe record of that call.
pub struct ForwardCtx<'t, 'h> {
    pub binder: Binder<'t>,
    pub eps: f64,
    pub scan: ScanMode,
    pub dropout: f64,
    pub dropout_site: DropoutSite,
    pub init_state: InitState,
    /// Draws dropout masks and random initial states. Required in training.
    pub rng: Option<&'h mut ChaCha8Rng>,
    pub noise: Option<NoiseHook<'h>>,
    pub probes: Vec<(String, Var<'t>)>,
}

impl<'t, 'h> ForwardCtx<'t, 'h> {
    /// Deterministic inference: constants, zero initial state, parallel scan.
    pub fn eval(tape: &'t Tape) -> Self {
        Self {
            binder: Binder::new(tape, false),
            eps: 0.0,
            scan: ScanMode::Parallel { block: DEFAULT_BLOCK },
            dropout: 0.0,
            dropout_site: DropoutSite::Off,
            init_state: InitState::Zero,
            rng: None,
            noise: None,
            probes: Vec::new(),
        }
    }

    pub fn train(tape: &'t Tape, eps: f64, dropout: f64, site: DropoutSite, rng: &'h mut ChaCha8Rng) -> Self {
        let scan = if eps == 0.0 {
            ScanMode::Parallel { block: DEFAULT_BLOCK }
        } else {
            ScanMode::Sequential
        };
        Self {
            binder: Binder::new(tape, true),
            eps,
            scan,
            dropout,
            dropout_site: site,
            init_state: InitState::Random,
            rng: Some(rng),
            noise: None,
            probes: Vec::new(),
        }
    }

    pub fn with_init_state(mut self, init: InitState) -> Self {
        self.init_state = init;
        self
    }

    pub fn with_noise(mut self, hook: NoiseHook<'h>) -> Self {
        self.noise = Some(hook);
        self
    }

    pub fn tape(&self) -> &'t Tape {
        self.binder.tape
    }

    pub fn training(&self) -> bool {
        self.binder.train
    }

    pub fn probe(&mut self, name: impl Into<String>, v: Var<'t>) {
        self.probes.push((name.into(), v));
    }

    pub fn probe_value(&self, name: &str) -> Option<Var<'t>> {
        self.probes.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Noise requested by the hook for `name`, as a tensor of the given shape.
    pub fn noise_for(&mut self, name: &str, rows: usize, cols: usize) -> Option<Tensor> {
        self.noise.as_mut().and_then(|h| h(name, rows, cols))
    }

    pub fn perturb(&mut self, name: &str, v: Var<'t>) -> Result<Var<'t>> {
        let (r, c) = v.shape();
        match self.noise_for(name, r, c) {
            Some(n) => v.add_const(&n),
            None => Ok(v),
        }
    }

    /// Inverted dropout at `site`, a no-op outside training.
    pub fn dropout_at(&mut self, site: DropoutSite, v: Var<'t>) -> Result<Var<'t>> {
        if self.dropout_site != site {
            return Ok(v);
        }
        self.dropout_any(v)
    }

    /// Inverted dropout regardless of site, a no-op outside training.
    pub fn dropout_any(&mut self, v: Var<'t>) -> Result<Var<'t>> {
        if !self.training() || self.dropout <= 0.0 {
            return Ok(v);
        }
        let p = self.dropout;
        let rng = self.rng.as_deref_mut().expect("training forward needs an rng");
        let (r, c) = v.shape();
        let keep = 1.0 / (1.0 - p);
        let mask = (0..r * c).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        v.mul_const(&Tensor::from_vec(r, c, mask)?)
    }

    /// Uniform `[0, 1)` draws, shape `rows x cols`, for random initial
    /// states; `None` when the initial state is zero.
    pub(crate) fn uniform(&mut self, rows: usize, cols: usize) -> Option<Tensor> {
        if !self.training() || self.init_state == InitState::Zero {
            return None;
        }
        let rng = self.rng.as_deref_mut()?;
        let data = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Tensor::from_vec(rows, cols, data).ok()
    }
}

/// Anything trainable by [`crate::training`]: maps time-major rows
/// (`(T * batch) x n_in`, row `t * batch + b`) to per-row logits.
pub trait SequenceModel: Parameterized {
    fn n_in(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn cell_kind(&self) -> CellKind;
    fn forward<'t>(&self, ctx: &mut ForwardCtx<'t, '_>, x: Var<'t>, batch: usize) -> Result<Var<'t>>;
}

/// Stacks equal-length `T x n` sequences into time-major rows.
pub fn time_major(seqs: &[&Tensor]) -> Result<Tensor> {
    let first = seqs.first().ok_or_else(|| shape_err("time_major", "empty batch"))?;
    let (t_len, n) = (first.rows(), first.cols());
    if seqs.iter().any(|s| s.rows() != t_len || s.cols() != n) {
        return Err(shape_err("time_major", "sequences differ in shape"));
    }
    let mut data = Vec::with_capacity(t_len * seqs.len() * n);
    for t in 0..t_len {
        for s in seqs {
            data.extend_from_slice(s.row_slice(t));
        }
    }
    Tensor::from_vec(t_len * seqs.len(), n, data)
}

/// Rows of sample `b` from a time-major matrix, as `T x cols`.
pub fn sample_rows(m: &Tensor, batch: usize, b: usize) -> Tensor {
    let t_len = m.rows() / batch;
    let mut data = Vec::with_capacity(t_len * m.cols());
    for t in 0..t_len {
        data.extend_from_slice(m.row_slice(t * batch + b));
    }
    Tensor::from_vec(t_len, m.cols(), data).expect("sized by construction")
}

/// Eval-mode per-sample logits (`T x C` each) for a batch of sequences.
pub fn infer_logits<M: SequenceModel + ?Sized>(model: &M, seqs: &[&Tensor]) -> Result<Vec<Tensor>> {
    let tape = Tape::new();
    let mut ctx = ForwardCtx::eval(&tape);
    let x = tape.constant(time_major(seqs)?);
    let logits = model.forward(&mut ctx, x, seqs.len())?.value();
    Ok((0..seqs.len()).map(|b| sample_rows(&logits, seqs.len(), b)).collect())
}

/// Majority-vote predictions in eval mode, evaluated in chunks.
pub fn predict<M: SequenceModel + ?Sized>(model: &M, seqs: &[Tensor], chunk: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(seqs.len());
    for part in seqs.chunks(chunk.max(1)) {
        let refs: Vec<&Tensor> = part.iter().collect();
        for l in infer_logits(model, &refs)? {
            out.push(majority_vote(&l));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
