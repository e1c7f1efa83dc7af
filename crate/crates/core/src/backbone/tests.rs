use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::software::glu;
use super::*;
use crate::cells::{init_bmru, Cell, FqBmruParams};
use crate::params::Linear;

fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
    Tensor::from_vec(rows, cols, v.to_vec()).unwrap()
}

fn hand_net() -> HardwareBackbone {
    HardwareBackbone {
        input_proj: Linear::new(t(1, 1, &[1.0]), t(1, 1, &[0.0])),
        layers: vec![HwLayer {
            cell: Cell::FqBmru(FqBmruParams {
                w_x: t(1, 1, &[1.0]),
                b_x: t(1, 1, &[0.0]),
                beta_lo: t(1, 1, &[0.3]),
                delta: t(1, 1, &[0.4]),
                alpha: t(1, 1, &[0.5]),
            }),
            fc: None,
        }],
        classifier: Linear::new(t(2, 1, &[1.0, -1.0]), t(1, 2, &[0.0, 0.2])),
    }
}

#[test]
fn hand_computed_five_step_trace() {
    let net = hand_net();
    let trace = net.forward_hw(&t(5, 1, &[0.9, 0.5, 0.1, 0.8, 0.6])).unwrap();
    let state = [0.5, 0.5, 0.0, 0.5, 0.5];
    let skip = [1.4, 1.0, 0.1, 1.3, 1.1];
    let logits = [[1.4, -1.2], [1.0, -0.8], [0.1, 0.1], [1.3, -1.1], [1.1, -0.9]];
    for i in 0..5 {
        assert_eq!(trace.get("layer1.state").unwrap().get(i, 0), state[i]);
        assert!((trace.get("layer1.skip").unwrap().get(i, 0) - skip[i]).abs() < 1e-15);
        for c in 0..2 {
            assert!((trace.logits().get(i, c) - logits[i][c]).abs() < 1e-15);
        }
    }
}

#[test]
fn zero_input_zero_bias_leaves_only_classifier_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = HardwareBackbone::init(CellKind::FqBmru, 3, 4, 2, 2, &mut rng);
    net.input_proj.b = Tensor::zeros(1, 4);
    for layer in &mut net.layers {
        if let Cell::FqBmru(p) = &mut layer.cell {
            p.b_x = Tensor::zeros(1, 4);
        }
        if let Some(fc) = &mut layer.fc {
            fc.b = Tensor::zeros(1, 4);
        }
    }
    let trace = net.forward_hw(&Tensor::zeros(7, 3)).unwrap();
    for (name, sig) in &trace.probes {
        if name == "logits" {
            for r in 0..7 {
                assert_eq!(sig.row_slice(r), net.classifier.b.data());
            }
        } else {
            assert!(sig.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
}

#[test]
fn probes_cover_every_stage() {
    let net = HardwareBackbone::init(CellKind::FqBmru, 13, 4, 2, 2, &mut ChaCha8Rng::seed_from_u64(2));
    let trace = net.forward_hw(&Tensor::zeros(3, 13)).unwrap();
    let names: Vec<&str> = trace.probes.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "input_proj",
            "layer1.candidate",
            "layer1.state",
            "layer1.skip",
            "layer1.fc",
            "layer2.candidate",
            "layer2.state",
            "layer2.skip",
            "logits"
        ]
    );
    assert_eq!(net.probe_names(), names);
}

#[test]
fn batched_forward_matches_single_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [CellKind::FqBmru, CellKind::Bmru, CellKind::Lru, CellKind::MinGru] {
        let net = HardwareBackbone::init(kind, 3, 4, 2, 2, &mut rng);
        let seqs: Vec<Tensor> = (0..4)
            .map(|_| Tensor::from_vec(6, 3, (0..18).map(|_| rng.random_range(0.0..1.5)).collect()).unwrap())
            .collect();
        let refs: Vec<&Tensor> = seqs.iter().collect();
        let batched = infer_logits(&net, &refs).unwrap();
        for (s, l) in seqs.iter().zip(&batched) {
            let single = net.forward_hw(s).unwrap();
            assert!(single.logits().sub(l).unwrap().max_abs() < 1e-12, "{kind:?}");
        }
    }
}

#[test]
fn glu_at_zero_gate_halves() {
    let tape = crate::autodiff::Tape::new();
    let x = tape.constant(t(1, 4, &[3.0, -2.0, 0.0, 0.0]));
    assert_eq!(glu(x).unwrap().value().data(), &[1.5, -1.0]);
}

#[test]
fn layer_norm_moments() {
    let tape = crate::autodiff::Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = tape.constant(Tensor::from_vec(5, 16, (0..80).map(|_| rng.random_range(-3.0..7.0)).collect()).unwrap());
    let y = x.layer_norm(0.0).value();
    for r in 0..5 {
        let row = y.row_slice(r);
        let mean = row.iter().sum::<f64>() / 16.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
    }
}

fn silence_sublayers(b: &mut SwBlock) {
    b.out_norm.gain = Tensor::zeros(1, b.out_norm.gain.cols());
    b.mlp.down.w = Tensor::zeros(b.mlp.down.w.rows(), b.mlp.down.w.cols());
    b.mlp.down.b = Tensor::zeros(1, b.mlp.down.b.cols());
}

#[test]
fn silenced_blocks_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = SoftwareBackbone::init(CellKind::FqBmru, 3, 8, 2, 4, 2, &mut rng);
    for b in &mut net.blocks {
        silence_sublayers(b);
    }
    let mut bare = net.clone();
    bare.blocks.clear();
    let x = Tensor::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let a = infer_logits(&net, &[&x]).unwrap();
    let b = infer_logits(&bare, &[&x]).unwrap();
    assert!(a[0].sub(&b[0]).unwrap().max_abs() < 1e-12);
}

#[test]
fn frozen_recurrence_reduces_to_residual_mlp() {
    // with the recurrent branch silenced, the cell parameters cannot matter
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut net = SoftwareBackbone::init(CellKind::MinGru, 3, 8, 2, 4, 2, &mut rng);
    for b in &mut net.blocks {
        b.out_norm.gain = Tensor::zeros(1, 8);
        b.out_norm.offset = Tensor::zeros(1, 8);
    }
    let mut other = net.clone();
    for b in &mut other.blocks {
        b.cell = Cell::Bmru(init_bmru(4, 8, &mut rng));
    }
    let x = Tensor::from_vec(6, 3, (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let a = infer_logits(&net, &[&x]).unwrap();
    let b = infer_logits(&other, &[&x]).unwrap();
    assert_eq!(a[0].data(), b[0].data());
}

fn random_bipolar(seed: u64) -> (BipolarBmruNet, Tensor, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..6);
    let n = rng.random_range(1..5);
    let c = rng.random_range(2..5);
    let cell = init_bmru(d, n, &mut rng);
    let head = Linear::init(d, c, &mut rng);
    let t_len = rng.random_range(1..40);
    let x = Tensor::from_vec(t_len, n, (0..t_len * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let h0 = (0..d)
        .map(|i| if rng.random::<bool>() { cell.alpha.data()[i] } else { -cell.alpha.data()[i] })
        .collect();
    (BipolarBmruNet { cell, head }, x, h0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unipolar_reparameterization_is_exact(seed in any::<u64>()) {
        let (net, x, h0) = random_bipolar(seed);
        let uni = reparameterize_unipolar(&net);
        let a = net.logits(&x, &h0).unwrap();
        let b = uni.logits(&x, &uni.initial_state(&h0)).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn hardware_probes_are_unipolar(seed in any::<u64>(), n_layers in 1usize..4, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = HardwareBackbone::init(CellKind::FqBmru, 3, d, n_layers, 2, &mut rng);
        let x = Tensor::from_vec(20, 3, (0..60).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let trace = net.forward_hw(&x).unwrap();
        for (name, sig) in &trace.probes {
            if name != "logits" {
                prop_assert!(sig.data().iter().all(|&v| v >= 0.0), "{}", name);
            }
        }
    }
}
