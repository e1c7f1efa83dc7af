use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cell::{cell_response, CellCalibration, CellState};
use super::fc::{fc_nodes, FcEnv};
use super::mirror::{CalibrationTable, MirrorMode};
use super::netlist::{CircuitNetlist, Stage};
use super::perturb::{Instance, PerturbationSpec};
use super::PA_PER_UNIT;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gaussian current added to the candidate node of one layer, fresh at
/// every frame. The candidate is not clamped afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateNoise {
    /// 1-based layer index.
    pub layer: usize,
    pub sigma_pa: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub mirror_mode: MirrorMode,
    pub table: CalibrationTable,
    pub cell_calibration: CellCalibration,
    pub perturbation: Option<PerturbationSpec>,
    pub noise: Option<CandidateNoise>,
    /// Supply voltage used to turn branch currents into power.
    pub v_dd: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            mirror_mode: MirrorMode::Ideal,
            table: CalibrationTable::synthetic(),
            cell_calibration: CellCalibration::default(),
            perturbation: None,
            noise: None,
            v_dd: 1.0,
        }
    }
}

impl SimOptions {
    pub fn perturbed(spec: PerturbationSpec) -> Self {
        Self {
            perturbation: Some(spec),
            ..Self::default()
        }
    }
}

/// Every probe as a `T x width` tensor in pA, and the mean power per stage.
#[derive(Clone, Debug)]
pub struct SimTrace {
    pub probes: Vec<(String, Tensor)>,
    pub stage_power_nw: Vec<(String, f64)>,
}

impl SimTrace {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.probes.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn logits(&self) -> &Tensor {
        self.get("logits").expect("every trace ends with logits")
    }

    pub fn total_power_nw(&self) -> f64 {
        self.stage_power_nw.iter().map(|(_, p)| p).sum()
    }
}

/// Feature frames to input currents.
pub fn to_currents(seq: &Tensor) -> Tensor {
    seq.scale(PA_PER_UNIT)
}

/// Frame-by-frame evaluation of `net` on `seq` (`T x n_in`, pA). A
/// perturbation is drawn once and held for the whole sequence.
pub fn simulate(net: &CircuitNetlist, seq: &Tensor, opts: &SimOptions) -> Result<SimTrace> {
    if seq.cols() != net.n_in {
        return Err(Error::Shape {
            op: "simulate",
            detail: format!("{} input columns for a {}-input netlist", seq.cols(), net.n_in),
        });
    }
    if let Some(v) = seq.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Precondition(format!("input current {v} pA is not non-negative")));
    }
    let mut inst = match &opts.perturbation {
        Some(p) => Instance::draw(net, p)?,
        None => Instance::nominal(net),
    };
    if opts.mirror_mode == MirrorMode::Calibrated {
        for c in &mut inst.cells {
            *c = c.calibrated(&opts.cell_calibration);
        }
    }
    let mut noise = match opts.noise {
        Some(n) => Some((
            format!("layer{}.candidate", n.layer),
            Normal::new(0.0, n.sigma_pa).map_err(|e| Error::Config(e.to_string()))?,
            ChaCha8Rng::seed_from_u64(n.seed),
        )),
        None => None,
    };
    let t_len = seq.rows();
    let mut states: Vec<CellState> = vec![CellState::Off; net.cells.len()];
    let mut out: HashMap<&str, Tensor> = HashMap::new();
    let mut power = vec![0.0; net.stages.len()];
    let mut nodes: HashMap<&str, Vec<f64>> = HashMap::new();

    for t in 0..t_len {
        nodes.clear();
        nodes.insert("input", seq.row_slice(t).to_vec());
        for (si, stage) in net.stages.iter().enumerate() {
            let (values, current) = match stage {
                Stage::Fc {
                    name,
                    input,
                    n_in,
                    n_out,
                    mirror_offset,
                    bias_offset,
                    activation,
                } => {
                    let x = &nodes[input.as_str()];
                    let m0 = *mirror_offset;
                    let env = FcEnv {
                        mirror_gain: &inst.mirror_gain[m0..m0 + n_in * n_out],
                        bias_gain: &inst.bias_gain[*bias_offset..bias_offset + n_out],
                        mode: opts.mirror_mode,
                        table: &opts.table,
                    };
                    let nodes_i = fc_nodes(
                        &net.mirrors[m0..m0 + n_in * n_out],
                        &net.biases_pa[*bias_offset..bias_offset + n_out],
                        x,
                        &env,
                    );
                    let drawn = nodes_i.iter().map(|n| n.pos + n.neg).sum::<f64>();
                    let mut v: Vec<f64> = nodes_i.iter().map(|n| n.output(*activation)).collect();
                    if let Some((target, dist, rng)) = noise.as_mut() {
                        if target == name {
                            for x in &mut v {
                                *x += dist.sample(rng);
                            }
                        }
                    }
                    (v, drawn)
                }
                Stage::Cells {
                    input, cell_offset, d, ..
                } => {
                    let x = &nodes[input.as_str()];
                    let mut v = Vec::with_capacity(*d);
                    for i in 0..*d {
                        let k = cell_offset + i;
                        let (cur, next) = cell_response(&inst.cells[k], states[k], x[i]);
                        states[k] = next;
                        v.push(if next == CellState::Off { inst.leakage_pa } else { cur });
                    }
                    let drawn = v.iter().sum();
                    (v, drawn)
                }
                Stage::Skip { inputs, .. } => {
                    let (a, b) = (&nodes[inputs[0].as_str()], &nodes[inputs[1].as_str()]);
                    (a.iter().zip(b).map(|(x, y)| x + y).collect(), 0.0)
                }
            };
            power[si] += current * opts.v_dd * 1e-3 / t_len.max(1) as f64;
            let name = stage.name();
            let width = values.len();
            out.entry(name)
                .or_insert_with(|| Tensor::zeros(t_len, width))
                .data_mut()[t * width..(t + 1) * width]
                .copy_from_slice(&values);
            nodes.insert(name, values);
        }
    }
    let probes = net
        .probes
        .iter()
        .map(|p| {
            out.remove(p.as_str())
                .map(|t| (p.clone(), t))
                .ok_or_else(|| Error::Data(format!("probe {p} has no producing stage")))
        })
        .collect::<Result<Vec<_>>>()?;
    let stage_power_nw = net.stages.iter().zip(power).map(|(s, p)| (s.name().to_string(), p)).collect();
    Ok(SimTrace { probes, stage_power_nw })
}

/// `t,probe,value_pA` with one row per probe coordinate, named `probe[i]`.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "probe", "value_pA"])?;
    for (name, t) in &trace.probes {
        for r in 0..t.rows() {
            for c in 0..t.cols() {
                w.write_record([r.to_string(), format!("{name}[{c}]"), t.get(r, c).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    pub mae_candidate_pa: f64,
    pub mae_state_pa: f64,
    /// `mae_candidate / max(mae_state, leakage_floor)`; infinite when both
    /// the state error and the floor are zero.
    pub ratio: f64,
}

/// Injects `noise_pa` Gaussian noise at `layer`'s candidates and compares
/// against the noise-free run of the same die.
pub fn measure_suppression(
    net: &CircuitNetlist,
    seqs: &[Tensor],
    layer: usize,
    noise_pa: f64,
    pert: PerturbationSpec,
    seed: u64,
) -> Result<SuppressionReport> {
    let clean_opts = SimOptions::perturbed(pert);
    let cand = format!("layer{layer}.candidate");
    let state = format!("layer{layer}.state");
    let (mut ec, mut es, mut nc, mut ns) = (0.0, 0.0, 0usize, 0usize);
    for (i, seq) in seqs.iter().enumerate() {
        let clean = simulate(net, seq, &clean_opts)?;
        let noisy = simulate(
            net,
            seq,
            &SimOptions {
                noise: Some(CandidateNoise {
                    layer,
                    sigma_pa: noise_pa,
                    seed: seed.wrapping_add(i as u64),
                }),
                ..clean_opts.clone()
            },
        )?;
        for (name, acc, n) in [(&cand, &mut ec, &mut nc), (&state, &mut es, &mut ns)] {
            let (a, b) = (
                clean.get(name).ok_or_else(|| Error::Data(format!("no probe {name}")))?,
                noisy.get(name).unwrap(),
            );
            *acc += a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>();
            *n += a.len();
        }
    }
    let mae_c = ec / nc.max(1) as f64;
    let mae_s = es / ns.max(1) as f64;
    let denom = mae_s.max(pert.leakage_pa);
    Ok(SuppressionReport {
        mae_candidate_pa: mae_c,
        mae_state_pa: mae_s,
        ratio: if denom > 0.0 { mae_c / denom } else { f64::INFINITY },
    })
}
