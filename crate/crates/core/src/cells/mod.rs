//! The four recurrent cells. All of them are affine in the previous state
//! once the input is fixed, so each also exposes its per-frame
//! [`AffineScanElement`] for the parallel scan.

mod bmru;
mod fq_bmru;
mod lru;
mod min_gru;
pub mod scan;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bmru::{bmru_step, init_bmru, BmruParams, BmruVars};
pub(crate) use bmru::sign;
pub use fq_bmru::{fq_bmru_step, init_fq_bmru, FqBmruParams, FqBmruVars};
pub use lru::{init_lru, lru_step, lru_step_with_lambda, LruParams, LruVars};
pub use min_gru::{init_min_gru, min_gru_step, MinGruParams, MinGruVars};
pub use scan::{AffineScanElement, DEFAULT_BLOCK};

use crate::error::{shape_err, Error, Result};
use crate::params::{Parameterized, Visit, VisitMut};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    FqBmru,
    Bmru,
    Lru,
    MinGru,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::FqBmru => "fq-bmru",
            CellKind::Bmru => "bmru",
            CellKind::Lru => "lru",
            CellKind::MinGru => "min-gru",
        }
    }

    /// Whether the training-time `eps` augmentation applies.
    pub fn is_bistable(self) -> bool {
        matches!(self, CellKind::FqBmru | CellKind::Bmru)
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fq-bmru" | "fq_bmru" => Ok(CellKind::FqBmru),
            "bmru" => Ok(CellKind::Bmru),
            "lru" => Ok(CellKind::Lru),
            "min-gru" | "mingru" | "min_gru" => Ok(CellKind::MinGru),
            other => Err(Error::Config(format!("unknown cell `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Cell {
    FqBmru(FqBmruParams),
    Bmru(BmruParams),
    Lru(LruParams),
    MinGru(MinGruParams),
}

impl Cell {
    pub fn kind(&self) -> CellKind {
        match self {
            Cell::FqBmru(_) => CellKind::FqBmru,
            Cell::Bmru(_) => CellKind::Bmru,
            Cell::Lru(_) => CellKind::Lru,
            Cell::MinGru(_) => CellKind::MinGru,
        }
    }

    pub fn n_in(&self) -> usize {
        match self {
            Cell::FqBmru(p) => p.n(),
            Cell::Bmru(p) => p.n(),
            Cell::Lru(p) => p.m(),
            Cell::MinGru(p) => p.m(),
        }
    }

    /// Width of the per-frame output.
    pub fn d_out(&self) -> usize {
        match self {
            Cell::FqBmru(p) => p.d(),
            Cell::Bmru(p) => p.d(),
            Cell::Lru(p) => p.d_out(),
            Cell::MinGru(p) => p.d(),
        }
    }

    /// Width of the recurrent state.
    pub fn d_state(&self) -> usize {
        match self {
            Cell::FqBmru(p) => p.d(),
            Cell::Bmru(p) => p.d(),
            Cell::Lru(p) => p.d(),
            Cell::MinGru(p) => p.d(),
        }
    }
}

impl Parameterized for Cell {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        match self {
            Cell::FqBmru(p) => p.visit(prefix, f),
            Cell::Bmru(p) => p.visit(prefix, f),
            Cell::Lru(p) => p.visit(prefix, f),
            Cell::MinGru(p) => p.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        match self {
            Cell::FqBmru(p) => p.visit_mut(prefix, f),
            Cell::Bmru(p) => p.visit_mut(prefix, f),
            Cell::Lru(p) => p.visit_mut(prefix, f),
            Cell::MinGru(p) => p.visit_mut(prefix, f),
        }
    }
}

fn check_inputs(cell: &Cell, inputs: &Tensor, h0: &[f64]) -> Result<()> {
    if inputs.cols() != cell.n_in() || h0.len() != cell.d_state() {
        return Err(shape_err(
            "scan",
            format!(
                "inputs {:?} / h0 {} for a cell taking {} and holding {}",
                inputs.shape(),
                h0.len(),
                cell.n_in(),
                cell.d_state()
            ),
        ));
    }
    Ok(())
}

/// Steps the cell frame by frame. `inputs` is `T x n`; the result holds one
/// output row per frame (the state itself, or `y` for the LRU, whose `h0`
/// is taken as the real part of its initial state). `eps` is only accepted
/// for the FQ cell.
pub fn scan_sequential(cell: &Cell, inputs: &Tensor, h0: &[f64], eps: f64) -> Result<Tensor> {
    check_inputs(cell, inputs, h0)?;
    if eps != 0.0 && cell.kind() != CellKind::FqBmru {
        return Err(Error::Unsupported(format!("eps augmentation on {}", cell.kind().name())));
    }
    let t_len = inputs.rows();
    let mut out = Vec::with_capacity(t_len * cell.d_out());
    match cell {
        Cell::FqBmru(p) => {
            let mut h = h0.to_vec();
            for t in 0..t_len {
                h = fq_bmru_step(p, inputs.row_slice(t), &h, eps)?.0;
                out.extend_from_slice(&h);
            }
        }
        Cell::Bmru(p) => {
            let mut h = h0.to_vec();
            for t in 0..t_len {
                h = bmru_step(p, inputs.row_slice(t), &h)?;
                out.extend_from_slice(&h);
            }
        }
        Cell::MinGru(p) => {
            let mut h = h0.to_vec();
            for t in 0..t_len {
                h = min_gru_step(p, inputs.row_slice(t), &h)?;
                out.extend_from_slice(&h);
            }
        }
        Cell::Lru(p) => {
            let mut x: Vec<Complex64> = h0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for t in 0..t_len {
                let (nx, y) = lru_step(p, inputs.row_slice(t), &x)?;
                x = nx;
                out.extend_from_slice(&y);
            }
        }
    }
    Tensor::from_vec(t_len, cell.d_out(), out)
}

/// Same result as [`scan_sequential`] at `eps = 0`, evaluated with the
/// blocked associative scan.
pub fn scan_parallel(cell: &Cell, inputs: &Tensor, h0: &[f64], block: usize) -> Result<Tensor> {
    check_inputs(cell, inputs, h0)?;
    let t_len = inputs.rows();
    let rows = |t: usize| inputs.row_slice(t);
    let states: Vec<Vec<f64>> = match cell {
        Cell::FqBmru(p) => {
            let elems: Vec<_> = (0..t_len).map(|t| p.element(&p.candidate(rows(t)), 0.0)).collect();
            scan::parallel(&elems, h0, block)
        }
        Cell::Bmru(p) => {
            let elems: Vec<_> = (0..t_len).map(|t| p.element(rows(t))).collect();
            scan::parallel(&elems, h0, block)
        }
        Cell::MinGru(p) => {
            let elems: Vec<_> = (0..t_len).map(|t| p.element(rows(t))).collect();
            scan::parallel(&elems, h0, block)
        }
        Cell::Lru(p) => {
            let lambda = p.eigenvalues();
            let elems: Vec<_> = (0..t_len).map(|t| p.element(&lambda, rows(t))).collect();
            let x0: Vec<Complex64> = h0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let xs = scan::parallel(&elems, &x0, block);
            xs.iter().enumerate().map(|(t, x)| p.output(x, rows(t))).collect()
        }
    };
    Tensor::from_vec(t_len, cell.d_out(), states.concat())
}
