use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::cell_forward;
use super::{ForwardCtx, SequenceModel};
use crate::autodiff::{Tape, Var};
use crate::cells::{init_bmru, init_fq_bmru, init_lru, init_min_gru, Cell, CellKind, FqBmruParams};
use crate::error::{Error, Result};
use crate::params::{join, Linear, Parameterized, Visit, VisitMut};
use crate::tensor::Tensor;

/// One recurrent layer: cell, skip around it, then (between layers) an FC
/// stage with ReLU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwLayer {
    pub cell: Cell,
    pub fc: Option<Linear>,
}

/// Circuit-compatible network: input projection (ReLU), `N` recurrent
/// layers with skips and inter-layer FC+ReLU, linear classifier.
///
/// Probes, per frame: `input_proj`, `layer{l}.candidate`, `layer{l}.state`,
/// `layer{l}.skip`, `layer{l}.fc` (not after the last layer) and `logits`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareBackbone {
    pub input_proj: Linear,
    pub layers: Vec<HwLayer>,
    pub classifier: Linear,
}

/// Eval-mode signals of one sequence, each `T x width`, in stage order.
#[derive(Clone, Debug)]
pub struct HwTrace {
    pub probes: Vec<(String, Tensor)>,
}

impl HwTrace {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.probes.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn logits(&self) -> &Tensor {
        self.get("logits").expect("every trace ends with logits")
    }
}

impl HardwareBackbone {
    pub fn init(kind: CellKind, n_in: usize, d: usize, n_layers: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let input_proj = Linear::init(n_in, d, rng);
        let layers = (0..n_layers.max(1))
            .map(|l| {
                let cell = match kind {
                    CellKind::FqBmru => Cell::FqBmru(init_fq_bmru(d, d, rng)),
                    CellKind::Bmru => Cell::Bmru(init_bmru(d, d, rng)),
                    CellKind::Lru => Cell::Lru(init_lru(d, d, d, rng)),
                    CellKind::MinGru => Cell::MinGru(init_min_gru(d, d, rng)),
                };
                let fc = (l + 1 < n_layers).then(|| Linear::init(d, d, rng));
                HwLayer { cell, fc }
            })
            .collect();
        Self {
            input_proj,
            layers,
            classifier: Linear::init(d, n_classes, rng),
        }
    }

    pub fn d(&self) -> usize {
        self.input_proj.n_out()
    }

    /// The FQ cells in layer order; errors if any layer uses another cell.
    pub fn fq_cells(&self) -> Result<Vec<&FqBmruParams>> {
        self.layers
            .iter()
            .enumerate()
            .map(|(l, layer)| match &layer.cell {
                Cell::FqBmru(p) => Ok(p),
                other => Err(Error::Unsupported(format!(
                    "layer{} uses {}, only fq-bmru layers map onto the circuit",
                    l + 1,
                    other.kind().name()
                ))),
            })
            .collect()
    }

    /// Stage names in the order the forward pass produces them.
    pub fn probe_names(&self) -> Vec<String> {
        let mut names = vec!["input_proj".to_string()];
        for (l, layer) in self.layers.iter().enumerate() {
            let p = format!("layer{}", l + 1);
            names.push(format!("{p}.candidate"));
            if layer.cell.kind() == CellKind::Lru {
                names.push(format!("{p}.hidden"));
            }
            names.push(format!("{p}.state"));
            names.push(format!("{p}.skip"));
            if layer.fc.is_some() {
                names.push(format!("{p}.fc"));
            }
        }
        names.push("logits".to_string());
        names
    }

    /// Eval-mode pass over one `T x n_in` sequence with every probe kept.
    pub fn forward_hw(&self, seq: &Tensor) -> Result<HwTrace> {
        let tape = Tape::new();
        let mut ctx = ForwardCtx::eval(&tape);
        self.forward(&mut ctx, tape.constant(seq.clone()), 1)?;
        Ok(HwTrace {
            probes: ctx
                .probes
                .iter()
                .map(|(n, v)| (n.clone(), v.value().as_ref().clone()))
                .collect(),
        })
    }
}

impl Parameterized for HardwareBackbone {
    fn visit(&self, prefix: &str, f: Visit<'_>) {
        self.input_proj.visit(&join(prefix, "input_proj"), f);
        for (l, layer) in self.layers.iter().enumerate() {
            let p = join(prefix, &format!("layer{}", l + 1));
            layer.cell.visit(&join(&p, "cell"), f);
            if let Some(fc) = &layer.fc {
                fc.visit(&join(&p, "fc"), f);
            }
        }
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: VisitMut<'_>) {
        self.input_proj.visit_mut(&join(prefix, "input_proj"), f);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let p = join(prefix, &format!("layer{}", l + 1));
            layer.cell.visit_mut(&join(&p, "cell"), f);
            if let Some(fc) = &mut layer.fc {
                fc.visit_mut(&join(&p, "fc"), f);
            }
        }
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}

impl SequenceModel for HardwareBackbone {
    fn n_in(&self) -> usize {
        self.input_proj.n_in()
    }

    fn n_classes(&self) -> usize {
        self.classifier.n_out()
    }

    fn cell_kind(&self) -> CellKind {
        self.layers[0].cell.kind()
    }

    fn forward<'t>(&self, ctx: &mut ForwardCtx<'t, '_>, x: Var<'t>, batch: usize) -> Result<Var<'t>> {
        let binder = ctx.binder;
        let s = self.input_proj.forward(&binder, "input_proj", x)?.relu();
        let mut s = ctx.perturb("input_proj", s)?;
        ctx.probe("input_proj", s);
        for (l, layer) in self.layers.iter().enumerate() {
            let p = format!("layer{}", l + 1);
            let h = cell_forward(ctx, &layer.cell, &join(&p, "cell"), &p, s, batch)?;
            let y = h.add(s)?;
            ctx.probe(format!("{p}.skip"), y);
            s = match &layer.fc {
                Some(fc) => {
                    let name = format!("{p}.fc");
                    let f = fc.forward(&binder, &name, y)?.relu();
                    let f = ctx.perturb(&name, f)?;
                    ctx.probe(name, f);
                    f
                }
                None => y,
            };
        }
        let logits = self.classifier.forward(&binder, "classifier", s)?;
        ctx.probe("logits", logits);
        Ok(logits)
    }
}
