use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::cell_forward;
use super::pe::sinusoidal_pe;
use super::{ForwardCtx, SequenceModel};
use crate::autodiff::Var;
use crate::cells::{init_bmru, init_fq_bmru, init_lru, init_min_gru, Cell, CellKind};
use crate::error::Result;
use crate::params::{join, Binder, Constraint, Linear, Parameterized, Visit, VisitMut};
use crate::tensor::Tensor;

const PE_DIM: usize = 32;
const LN_EPS: f64 = 1e-5;

/// LayerNorm with learnable gain and offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormAffine {
    pub gain: Tensor,
    pub offset: Tensor,
}

impl NormAffine {
    pub fn new(m: usize) -> Self {
        Self {
            gain: Tensor::filled(1, m, 1.0),
            offset: Tensor::zeros(1, m),
        }
    }

    fn forward<'t>(&self, binder: &Binder<'t>, prefix: &str, x: Var<'t>) -> Result<Var<'t>> {
        let g = binder.bind(&join(prefix, "gain"), &self.gain, Constraint::None);
        let o = binder.bind(&join(prefix, "offset"), &self.offset, Constraint::None);
        x.layer_norm(LN_EPS).mul_row(g)?.add_row(o)
    }
}

impl Parameterized for NormAffine {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        f(&join(prefix, "gain"), &self.gain, Constraint::None);
        f(&join(prefix, "offset"), &self.offset, Constraint::None);
    }
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        f(&join(prefix, "gain"), &mut self.gain, Constraint::None);
        f(&join(prefix, "offset"), &mut self.offset, Constraint::None);
    }
}

/// `Linear(Dropout(GLU(Linear(x))))`, GLU halves `(a | b) -> a * sigmoid(b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub up: Linear,
    pub down: Linear,
}

pub(crate) fn glu(x: Var<'_>) -> Result<Var<'_>> {
    let w = x.shape().1 / 2;
    x.slice_cols(0, w)?.mul(x.slice_cols(w, 2 * w)?.sigmoid())
}

impl Mlp {
    pub fn init(width: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            up: Linear::init(width, 2 * hidden, rng),
            down: Linear::init(hidden, width, rng),
        }
    }

    fn forward<'t>(&self, ctx: &mut ForwardCtx<'t, '_>, prefix: &str, x: Var<'t>) -> Result<Var<'t>> {
        let binder = ctx.binder;
        let h = glu(self.up.forward(&binder, &join(prefix, "up"), x)?)?;
        let h = ctx.dropout_any(h)?;
        self.down.forward(&binder, &join(prefix, "down"), h)
    }
}

impl Parameterized for Mlp {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        self.up.visit(&join(prefix, "up"), f);
        self.down.visit(&join(prefix, "down"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        self.up.visit_mut(&join(prefix, "up"), f);
        self.down.visit_mut(&join(prefix, "down"), f);
    }
}

/// Recurrent sub-layer and MLP sub-layer, each `y = upsilon * x + F(Norm(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwBlock {
    pub norm_rec: NormAffine,
    pub cell: Cell,
    pub out_proj: Linear,
    pub out_norm: NormAffine,
    pub gate: Linear,
    pub upsilon_rec: Tensor,
    pub norm_mlp: NormAffine,
    pub mlp: Mlp,
    pub upsilon_mlp: Tensor,
}

impl Parameterized for SwBlock {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        self.norm_rec.visit(&join(prefix, "norm_rec"), f);
        self.cell.visit(&join(prefix, "cell"), f);
        self.out_proj.visit(&join(prefix, "out_proj"), f);
        self.out_norm.visit(&join(prefix, "out_norm"), f);
        self.gate.visit(&join(prefix, "gate"), f);
        f(&join(prefix, "upsilon_rec"), &self.upsilon_rec, Constraint::None);
        self.norm_mlp.visit(&join(prefix, "norm_mlp"), f);
        self.mlp.visit(&join(prefix, "mlp"), f);
        f(&join(prefix, "upsilon_mlp"), &self.upsilon_mlp, Constraint::None);
    }
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        self.norm_rec.visit_mut(&join(prefix, "norm_rec"), f);
        self.cell.visit_mut(&join(prefix, "cell"), f);
        self.out_proj.visit_mut(&join(prefix, "out_proj"), f);
        self.out_norm.visit_mut(&join(prefix, "out_norm"), f);
        self.gate.visit_mut(&join(prefix, "gate"), f);
        f(&join(prefix, "upsilon_rec"), &mut self.upsilon_rec, Constraint::None);
        self.norm_mlp.visit_mut(&join(prefix, "norm_mlp"), f);
        self.mlp.visit_mut(&join(prefix, "mlp"), f);
        f(&join(prefix, "upsilon_mlp"), &mut self.upsilon_mlp, Constraint::None);
    }
}

/// Encoder (linear + residual MLP), positional encoding concatenated and
/// projected back, `r` blocks, decoder (linear + residual MLP).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftwareBackbone {
    pub encoder: Linear,
    pub encoder_mlp: Mlp,
    pub pe_proj: Linear,
    pub blocks: Vec<SwBlock>,
    pub decoder: Linear,
    pub decoder_mlp: Mlp,
}

impl SoftwareBackbone {
    /// Desk-scale defaults are `m = 64`, `r = 2`, `d = 32`.
    pub fn init(kind: CellKind, n_in: usize, m: usize, r: usize, d: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let blocks = (0..r)
            .map(|_| SwBlock {
                norm_rec: NormAffine::new(m),
                cell: match kind {
                    CellKind::FqBmru => Cell::FqBmru(init_fq_bmru(d, m, rng)),
                    CellKind::Bmru => Cell::Bmru(init_bmru(d, m, rng)),
                    CellKind::Lru => Cell::Lru(init_lru(d, m, d, rng)),
                    CellKind::MinGru => Cell::MinGru(init_min_gru(d, m, rng)),
                },
                out_proj: Linear::init(d, m, rng),
                out_norm: NormAffine::new(m),
                gate: Linear::init(m, m, rng),
                upsilon_rec: Tensor::filled(1, m, 1.0),
                norm_mlp: NormAffine::new(m),
                mlp: Mlp::init(m, 4 * m, rng),
                upsilon_mlp: Tensor::filled(1, m, 1.0),
            })
            .collect();
        Self {
            encoder: Linear::init(n_in, m, rng),
            encoder_mlp: Mlp::init(m, 4 * m, rng),
            pe_proj: Linear::init(m + PE_DIM, m, rng),
            blocks,
            decoder: Linear::init(m, n_classes, rng),
            decoder_mlp: Mlp::init(n_classes, 4 * m, rng),
        }
    }

    pub fn m(&self) -> usize {
        self.encoder.n_out()
    }
}

impl Parameterized for SoftwareBackbone {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.encoder_mlp.visit(&join(prefix, "encoder_mlp"), f);
        self.pe_proj.visit(&join(prefix, "pe_proj"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("block{}", i + 1)), f);
        }
        self.decoder.visit(&join(prefix, "decoder"), f);
        self.decoder_mlp.visit(&join(prefix, "decoder_mlp"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.encoder_mlp.visit_mut(&join(prefix, "encoder_mlp"), f);
        self.pe_proj.visit_mut(&join(prefix, "pe_proj"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("block{}", i + 1)), f);
        }
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
        self.decoder_mlp.visit_mut(&join(prefix, "decoder_mlp"), f);
    }
}

impl SequenceModel for SoftwareBackbone {
    fn n_in(&self) -> usize {
        self.encoder.n_in()
    }

    fn n_classes(&self) -> usize {
        self.decoder.n_out()
    }

    fn cell_kind(&self) -> CellKind {
        self.blocks.first().map(|b| b.cell.kind()).unwrap_or(CellKind::FqBmru)
    }

    fn forward<'t>(&self, ctx: &mut ForwardCtx<'t, '_>, x: Var<'t>, batch: usize) -> Result<Var<'t>> {
        let binder = ctx.binder;
        let tape = ctx.tape();
        let rows = x.shape().0;
        let t_len = rows / batch.max(1);

        let e = self.encoder.forward(&binder, "encoder", x)?;
        let e = e.add(self.encoder_mlp.forward(ctx, "encoder_mlp", e)?)?;
        let pe = sinusoidal_pe(t_len, PE_DIM);
        let mut tiled = Vec::with_capacity(rows * PE_DIM);
        for t in 0..t_len {
            for _ in 0..batch {
                tiled.extend_from_slice(pe.row_slice(t));
            }
        }
        let pe = tape.constant(Tensor::from_vec(rows, PE_DIM, tiled)?);
        let mut h = self.pe_proj.forward(&binder, "pe_proj", Var::concat_cols(&[e, pe])?)?;

        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("block{}", i + 1);
            let u = b.norm_rec.forward(&binder, &join(&p, "norm_rec"), h)?;
            let c = cell_forward(ctx, &b.cell, &join(&p, "cell"), &p, u, batch)?;
            let proj = b.out_proj.forward(&binder, &join(&p, "out_proj"), c)?;
            let proj = b.out_norm.forward(&binder, &join(&p, "out_norm"), proj)?;
            let g = b.gate.forward(&binder, &join(&p, "gate"), u)?.sigmoid();
            let ups = binder.bind(&join(&p, "upsilon_rec"), &b.upsilon_rec, Constraint::None);
            h = h.mul_row(ups)?.add(proj.mul(g)?)?;

            let u = b.norm_mlp.forward(&binder, &join(&p, "norm_mlp"), h)?;
            let f = b.mlp.forward(ctx, &join(&p, "mlp"), u)?;
            let ups = binder.bind(&join(&p, "upsilon_mlp"), &b.upsilon_mlp, Constraint::None);
            h = h.mul_row(ups)?.add(f)?;
        }

        let y = self.decoder.forward(&binder, "decoder", h)?;
        let logits = y.add(self.decoder_mlp.forward(ctx, "decoder_mlp", y)?)?;
        ctx.probe("logits", logits);
        Ok(logits)
    }
}
