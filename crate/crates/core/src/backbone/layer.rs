use super::{DropoutSite, ForwardCtx};
use crate::autodiff::Var;
use crate::cells::Cell;
use crate::error::Result;
use crate::tensor::Tensor;

/// Runs one recurrent cell over time-major rows and records its probes
/// under `probe` (`.candidate`, `.state`, and `.hidden` for the LRU).
///
/// Noise hooks: the FQ and bipolar cells take noise on the candidate; the
/// minGRU on its state (through the recurrence input, so it accumulates);
/// the LRU on its complex hidden state, likewise.
pub(crate) fn cell_forward<'t>(
    ctx: &mut ForwardCtx<'t, '_>,
    cell: &Cell,
    prefix: &str,
    probe: &str,
    s: Var<'t>,
    batch: usize,
) -> Result<Var<'t>> {
    let tape = ctx.tape();
    let s = ctx.dropout_at(DropoutSite::CellInput, s)?;
    let rows = s.shape().0;
    let cand_name = format!("{probe}.candidate");
    let state_name = format!("{probe}.state");
    let h = match cell {
        Cell::FqBmru(p) => {
            let v = p.bind(&ctx.binder, prefix)?;
            let h_hat = v.candidate(s)?;
            let h_hat = ctx.dropout_at(DropoutSite::Candidate, h_hat)?;
            let h_hat = ctx.perturb(&cand_name, h_hat)?;
            ctx.probe(cand_name, h_hat);
            let h0 = match ctx.uniform(batch, p.d()) {
                // alpha * H(u - 1/2): a random on/off start
                Some(u) => tape
                    .constant(Tensor::filled(batch, p.d(), 1.0))
                    .mul_row(v.alpha)?
                    .mul_const(&u.map(|u| if u > 0.5 { 1.0 } else { 0.0 }))?,
                None => tape.constant(Tensor::zeros(batch, p.d())),
            };
            v.scan(h_hat, h0, ctx.eps, batch, ctx.scan)?
        }
        Cell::Bmru(p) => {
            let v = p.bind(&ctx.binder, prefix);
            let h_hat = v.candidate(s)?;
            let h_hat = ctx.dropout_at(DropoutSite::Candidate, h_hat)?;
            let h_hat = ctx.perturb(&cand_name, h_hat)?;
            ctx.probe(cand_name, h_hat);
            let h0 = match ctx.uniform(batch, p.d()) {
                Some(u) => tape
                    .constant(Tensor::filled(batch, p.d(), 1.0))
                    .mul_row(v.alpha)?
                    .mul_const(&u.map(|u| if u > 0.5 { 1.0 } else { -1.0 }))?,
                None => tape.constant(Tensor::zeros(batch, p.d())),
            };
            v.scan(s, h_hat, h0, ctx.eps, batch, ctx.scan)?
        }
        Cell::MinGru(p) => {
            let v = p.bind(&ctx.binder, prefix);
            let h_tilde = v.candidate(s)?;
            ctx.probe(cand_name, h_tilde);
            let extra = ctx.noise_for(&state_name, rows, p.d());
            let h0 = tape.constant(Tensor::zeros(batch, p.d()));
            v.scan(s, h_tilde, h0, extra.as_ref(), batch, ctx.scan)?
        }
        Cell::Lru(p) => {
            let v = p.bind(&ctx.binder, prefix);
            let drive = v.drive(s)?;
            ctx.probe(cand_name, drive.0);
            let hidden_name = format!("{probe}.hidden");
            let extra = ctx.noise_for(&hidden_name, rows, 2 * p.d());
            let (y, x) = v.scan(s, drive, extra.as_ref(), batch, ctx.scan)?;
            ctx.probe(hidden_name, x);
            y
        }
    };
    ctx.probe(state_name, h);
    Ok(h)
}

