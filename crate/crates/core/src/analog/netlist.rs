use serde::{Deserialize, Serialize};

use super::cell::BistableCellModel;
use super::mirror::MirrorSpec;
use super::PA_PER_UNIT;
use crate::backbone::HardwareBackbone;
use crate::error::{Error, Result};
use crate::params::{Linear, Parameterized};
use crate::quant::{quantize, QuantSpec};

pub const NETLIST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// Diode output: only net sourced current leaves the node.
    Relu,
    /// Only net sunk current, reported as a magnitude.
    AntiRelu,
    /// Both diodes: positive part on one wire, negative part on another,
    /// read out as their difference.
    Signed,
}

/// One evaluation step of the circuit. Every stage reads named nodes and
/// writes the node carrying its own name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stage {
    Fc {
        name: String,
        input: String,
        n_in: usize,
        n_out: usize,
        /// Mirrors `mirror_offset + o * n_in + i`, row-major like the weights.
        mirror_offset: usize,
        bias_offset: usize,
        activation: Activation,
    },
    Cells {
        name: String,
        input: String,
        cell_offset: usize,
        d: usize,
    },
    /// Wire junction: the sum of two nodes, branch by branch.
    Skip { name: String, inputs: [String; 2] },
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::Fc { name, .. } | Stage::Cells { name, .. } | Stage::Skip { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitNetlist {
    pub version: u32,
    pub n_in: usize,
    pub n_classes: usize,
    pub stages: Vec<Stage>,
    pub cells: Vec<BistableCellModel>,
    pub mirrors: Vec<MirrorSpec>,
    /// Signed: positive values are sourced, negative ones sunk.
    #[serde(rename = "biases_pA")]
    pub biases_pa: Vec<f64>,
    pub probes: Vec<String>,
}

impl CircuitNetlist {
    /// Mirrors, bias sources and the three bias currents of each cell.
    pub fn element_count(&self) -> usize {
        self.mirrors.len() + self.biases_pa.len() + 3 * self.cells.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        if net.version != NETLIST_VERSION {
            return Err(Error::Data(format!(
                "netlist version {} (expected {NETLIST_VERSION})",
                net.version
            )));
        }
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            c.validate().map_err(|e| Error::Data(format!("cell {i}: {e}")))?;
        }
        for s in &self.stages {
            let ok = match s {
                Stage::Fc {
                    n_in,
                    n_out,
                    mirror_offset,
                    bias_offset,
                    ..
                } => mirror_offset + n_in * n_out <= self.mirrors.len() && bias_offset + n_out <= self.biases_pa.len(),
                Stage::Cells { cell_offset, d, .. } => cell_offset + d <= self.cells.len(),
                Stage::Skip { .. } => true,
            };
            if !ok {
                return Err(Error::Data(format!("stage {} indexes past its element arrays", s.name())));
            }
        }
        Ok(())
    }
}

struct Builder {
    net: CircuitNetlist,
}

impl Builder {
    fn fc(&mut self, name: &str, input: &str, lin: &Linear, activation: Activation) {
        let stage = Stage::Fc {
            name: name.to_string(),
            input: input.to_string(),
            n_in: lin.n_in(),
            n_out: lin.n_out(),
            mirror_offset: self.net.mirrors.len(),
            bias_offset: self.net.biases_pa.len(),
            activation,
        };
        self.net.mirrors.extend(lin.w.data().iter().map(|&w| MirrorSpec::for_weight(w)));
        self.net.biases_pa.extend(lin.b.data().iter().map(|&b| b * PA_PER_UNIT));
        self.net.stages.push(stage);
    }
}

/// Maps a hardware backbone with FQ cells onto mirrors, bias sources and
/// bistable cells, optionally quantizing every parameter first.
pub fn compile(model: &HardwareBackbone, quant: Option<QuantSpec>) -> Result<CircuitNetlist> {
    let quantized;
    let model = match quant {
        Some(q) => {
            quantized = quantize(model, q)?;
            &quantized
        }
        None => model,
    };
    let cells = model.fq_cells()?;
    let mut b = Builder {
        net: CircuitNetlist {
            version: NETLIST_VERSION,
            n_in: model.input_proj.n_in(),
            n_classes: model.classifier.n_out(),
            stages: Vec::new(),
            cells: Vec::new(),
            mirrors: Vec::new(),
            biases_pa: Vec::new(),
            probes: model.probe_names(),
        },
    };
    b.fc("input_proj", "input", &model.input_proj, Activation::Relu);
    let mut s = "input_proj".to_string();
    for (l, (layer, p)) in model.layers.iter().zip(cells).enumerate() {
        let name = format!("layer{}", l + 1);
        for i in 0..p.d() {
            let (lo, delta, alpha) = (p.beta_lo.data()[i], p.delta.data()[i], p.alpha.data()[i]);
            if !(lo > 0.0) || !(delta > 0.0) || !(alpha > 0.0) {
                return Err(Error::Compile(format!(
                    "{name}.cell[{i}] is not bistable: beta_lo {lo}, delta {delta}, alpha {alpha}"
                )));
            }
            b.net.cells.push(BistableCellModel {
                i_thresh: (lo + delta) * PA_PER_UNIT,
                i_width: delta * PA_PER_UNIT,
                i_gain: alpha * PA_PER_UNIT,
            });
        }
        let cand = format!("{name}.candidate");
        b.fc(&cand, &s, &Linear::new(p.w_x.clone(), p.b_x.clone()), Activation::Relu);
        let state = format!("{name}.state");
        b.net.stages.push(Stage::Cells {
            name: state.clone(),
            input: cand,
            cell_offset: b.net.cells.len() - p.d(),
            d: p.d(),
        });
        let skip = format!("{name}.skip");
        b.net.stages.push(Stage::Skip {
            name: skip.clone(),
            inputs: [state, s.clone()],
        });
        s = skip;
        if let Some(fc) = &layer.fc {
            let fc_name = format!("{name}.fc");
            b.fc(&fc_name, &s, fc, Activation::Relu);
            s = fc_name;
        }
    }
    b.fc("logits", &s, &model.classifier, Activation::Signed);
    debug_assert_eq!(b.net.element_count(), model.param_count());
    b.net.validate()?;
    Ok(b.net)
}
