use super::mirror::{mirror_out, Branch, CalibrationTable, MirrorMode, MirrorSpec};
use super::netlist::Activation;

/// Sourced and sunk totals at one output node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeCurrents {
    pub pos: f64,
    pub neg: f64,
}

impl NodeCurrents {
    pub fn net(&self) -> f64 {
        self.pos - self.neg
    }

    pub fn output(&self, act: Activation) -> f64 {
        match act {
            Activation::Relu => self.net().max(0.0),
            Activation::AntiRelu => (-self.net()).max(0.0),
            Activation::Signed => self.net(),
        }
    }
}

/// Per-element multipliers and mirror behavior for [`fc_nodes`].
pub(crate) struct FcEnv<'a> {
    pub mirror_gain: &'a [f64],
    pub bias_gain: &'a [f64],
    pub mode: MirrorMode,
    pub table: &'a CalibrationTable,
}

/// KCL at each output: mirrored inputs on their branches plus the bias.
/// `mirrors` is row-major `n_out x n_in`.
pub(crate) fn fc_nodes(mirrors: &[MirrorSpec], biases_pa: &[f64], input: &[f64], env: &FcEnv) -> Vec<NodeCurrents> {
    let n_in = input.len();
    biases_pa
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let mut n = NodeCurrents::default();
            for (i, &x) in input.iter().enumerate() {
                let k = o * n_in + i;
                let m = mirrors[k];
                let cur = mirror_out(m.ratio * env.mirror_gain[k], x, env.mode, env.table);
                match m.branch {
                    Branch::Pos => n.pos += cur,
                    Branch::Neg => n.neg += cur,
                }
            }
            let b = b * env.bias_gain[o];
            if b >= 0.0 {
                n.pos += b;
            } else {
                n.neg -= b;
            }
            n
        })
        .collect()
}

/// Ideal fully connected stage: one output per bias entry.
pub fn fc_stage(mirrors: &[MirrorSpec], biases_pa: &[f64], input: &[f64], activation: Activation) -> Vec<f64> {
    let ones_m = vec![1.0; mirrors.len()];
    let ones_b = vec![1.0; biases_pa.len()];
    let table = CalibrationTable::synthetic();
    let env = FcEnv {
        mirror_gain: &ones_m,
        bias_gain: &ones_b,
        mode: MirrorMode::Ideal,
        table: &table,
    };
    fc_nodes(mirrors, biases_pa, input, &env)
        .iter()
        .map(|n| n.output(activation))
        .collect()
}
