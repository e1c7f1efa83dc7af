use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::backbone::HardwareBackbone;
use crate::cells::{Cell, CellKind};
use crate::error::Error;
use crate::params::Parameterized;
use crate::tensor::Tensor;

fn switching_model(seed: u64, d: usize) -> HardwareBackbone {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = HardwareBackbone::init(CellKind::FqBmru, 3, d, 2, 2, &mut rng);
    for layer in &mut m.layers {
        if let Cell::FqBmru(p) = &mut layer.cell {
            p.beta_lo = Tensor::row((0..d).map(|_| rng.random_range(0.01..0.05)).collect());
            p.delta = Tensor::row((0..d).map(|_| rng.random_range(0.02..0.1)).collect());
        }
    }
    m
}

fn random_seq(seed: u64, t: usize, n: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec(t, n, (0..t * n).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap()
}

#[test]
fn unit_map_examples() {
    let mut m = switching_model(1, 1);
    if let Cell::FqBmru(p) = &mut m.layers[0].cell {
        p.alpha = Tensor::row(vec![0.5]);
        p.beta_lo = Tensor::row(vec![0.152]);
        p.delta = Tensor::row(vec![0.368 - 0.152]);
    }
    let net = compile(&m, None).unwrap();
    let c = net.cells[0];
    assert!((c.i_gain - 500.0).abs() < 1e-9);
    assert!((c.i_thresh - 368.0).abs() < 1e-9);
    assert!((c.i_width - 216.0).abs() < 1e-9);
}

#[test]
fn element_count_matches_parameter_count() {
    for d in [1, 4, 8] {
        let m = switching_model(d as u64, d);
        let net = compile(&m, None).unwrap();
        assert_eq!(net.element_count(), m.param_count());
        assert_eq!(net.mirrors.len(), 3 * d + 2 * d * d + d * d + 2 * d);
    }
}

#[test]
fn compile_rejects_non_bistable_cell() {
    let mut m = switching_model(2, 4);
    if let Cell::FqBmru(p) = &mut m.layers[1].cell {
        p.beta_lo.data_mut()[2] = 0.0;
    }
    match compile(&m, None) {
        Err(Error::Compile(msg)) => assert!(msg.contains("layer2.cell[2]"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let lru = HardwareBackbone::init(CellKind::Lru, 3, 4, 2, 2, &mut rng);
    assert!(matches!(compile(&lru, None), Err(Error::Unsupported(_))));
}

#[test]
fn cell_response_examples() {
    let c = BistableCellModel {
        i_thresh: 368.0,
        i_width: 216.0,
        i_gain: 486.0,
    };
    assert_eq!(cell_response(&c, CellState::Off, 300.0), (0.0, CellState::Off));
    assert_eq!(cell_response(&c, CellState::On, 200.0), (486.0, CellState::On));
    assert_eq!(cell_response(&c, CellState::Off, 368.0), (0.0, CellState::Off));
    assert_eq!(cell_response(&c, CellState::On, 152.0), (486.0, CellState::On));
}

/// Ramps 0 -> 500 -> 0 pA in 0.5 pA steps; returns (up level, down level, high output).
fn sweep(c: &BistableCellModel) -> (f64, f64, f64, usize) {
    let up: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.5).collect();
    let ramp: Vec<f64> = up.iter().chain(up.iter().rev()).copied().collect();
    let mut state = CellState::Off;
    let (mut on_at, mut off_at, mut high, mut transitions) = (f64::NAN, f64::NAN, 0.0, 0);
    for &i in &ramp {
        let (out, next) = cell_response(c, state, i);
        if next != state {
            transitions += 1;
            if next == CellState::On {
                on_at = i;
            } else {
                off_at = i;
            }
        }
        if next == CellState::On {
            high = out;
        }
        state = next;
    }
    (on_at, off_at, high, transitions)
}

#[test]
fn hysteresis_loop() {
    let c = BistableCellModel {
        i_thresh: 368.0,
        i_width: 216.0,
        i_gain: 486.0,
    };
    let (up, down, high, n) = sweep(&c);
    assert_eq!((up, down, high, n), (368.5, 151.5, 486.0, 2));
    let (up, down, high, n) = sweep(&c.calibrated(&CellCalibration::default()));
    assert_eq!(n, 2);
    assert!((up - 350.0).abs() <= 0.5 && (down - 150.0).abs() <= 0.5, "{up} {down}");
    assert!((high - 500.0).abs() < 1e-9);
}

#[test]
fn fc_stage_examples() {
    let w2 = [MirrorSpec::for_weight(2.0)];
    assert_eq!(fc_stage(&w2, &[0.0], &[100.0], Activation::Relu), vec![200.0]);
    let pm = [MirrorSpec::for_weight(1.0), MirrorSpec::for_weight(-1.0)];
    assert_eq!(fc_stage(&pm, &[0.0], &[70.0, 70.0], Activation::Relu), vec![0.0]);
    let neg = [MirrorSpec::for_weight(-1.5)];
    assert_eq!(fc_stage(&neg, &[0.0], &[100.0], Activation::Relu), vec![0.0]);
    assert_eq!(fc_stage(&neg, &[0.0], &[100.0], Activation::AntiRelu), vec![150.0]);
    assert_eq!(fc_stage(&neg, &[20.0], &[100.0], Activation::Signed), vec![-130.0]);
}

#[test]
fn fc_stage_matches_software_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let lin = crate::params::Linear::init(4, 4, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let mirrors: Vec<MirrorSpec> = lin.w.data().iter().map(|&w| MirrorSpec::for_weight(w)).collect();
        let biases: Vec<f64> = lin.b.data().iter().map(|b| b * PA_PER_UNIT).collect();
        let xa: Vec<f64> = x.iter().map(|v| v * PA_PER_UNIT).collect();
        let hw = fc_stage(&mirrors, &biases, &xa, Activation::Relu);
        for (h, s) in hw.iter().zip(lin.apply(&x)) {
            assert!((h - s.max(0.0) * PA_PER_UNIT).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_input_without_biases_is_silent() {
    let mut m = switching_model(3, 4);
    m.visit_mut("", &mut |name, t, _| {
        if name.ends_with(".b") || name.ends_with(".b_x") {
            *t = t.map(|_| 0.0);
        }
    });
    let net = compile(&m, None).unwrap();
    let tr = simulate(&net, &Tensor::zeros(10, 3), &SimOptions::default()).unwrap();
    for (_, t) in &tr.probes {
        assert!(t.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn ideal_simulation_equals_software() {
    for seed in 0..10 {
        let m = switching_model(seed, 4);
        let net = compile(&m, None).unwrap();
        let seq = random_seq(100 + seed, 64, 3);
        let sw = m.forward_hw(&seq).unwrap();
        let hw = simulate(&net, &to_currents(&seq), &SimOptions::default()).unwrap();
        assert_eq!(hw.probes.len(), sw.probes.len());
        let mut switched = false;
        for ((n1, a), (n2, b)) in sw.probes.iter().zip(&hw.probes) {
            assert_eq!(n1, n2);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x * PA_PER_UNIT - y).abs() < 1e-9, "{n1}: {x} vs {y}");
            }
            switched |= n1.ends_with(".state") && a.data().iter().any(|&v| v > 0.0);
        }
        assert!(switched);
    }
}

#[test]
fn calibrated_mirror_error_bounded() {
    let table = CalibrationTable::synthetic();
    for &r in &[0.05, 0.3, 1.0, 2.5, 40.0] {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..60 {
            let i = 10f64.powf(k as f64 / 10.0);
            let e = table.effective_ratio(r, i) / r - 1.0;
            assert!(e.abs() <= 0.06 && e < 0.0);
            assert!(e >= prev - 1e-15);
            prev = e;
        }
    }
    assert!((table.effective_ratio(1.0, 10.0) - 0.9475).abs() < 1e-12);
    assert!((table.effective_ratio(1.0, 10_000.0) - 0.972).abs() < 1e-12);
    assert_eq!(mirror_out(2.0, 100.0, MirrorMode::Ideal, &table), 200.0);
}

#[test]
fn calibration_csv_round_trip() {
    let t = CalibrationTable::synthetic();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert!(buf.starts_with(b"target_ratio,input_pA,effective_ratio\n"));
    let back = CalibrationTable::read_csv(&buf[..]).unwrap();
    assert_eq!(back, t);
    let partial = b"target_ratio,input_pA,effective_ratio\n1,10,0.9\n2,10,1.9\n1,100,0.95\n";
    assert!(CalibrationTable::read_csv(&partial[..]).is_err());
}

#[test]
fn netlist_json_round_trip() {
    let net = compile(&switching_model(4, 4), None).unwrap();
    let json = net.to_json().unwrap();
    for key in ["\"stages\"", "\"cells\"", "\"I_thresh_pA\"", "\"mirrors\"", "\"biases_pA\"", "\"probes\""] {
        assert!(json.contains(key), "{key}");
    }
    assert_eq!(CircuitNetlist::from_json(&json).unwrap(), net);
    let bumped = json.replacen("\"version\": 1", "\"version\": 9", 1);
    assert!(CircuitNetlist::from_json(&bumped).is_err());
}

#[test]
fn perturbation_draws_are_seeded_and_zero_sigma_is_nominal() {
    let net = compile(&switching_model(5, 4), None).unwrap();
    let a = Instance::draw(&net, &PerturbationSpec::mismatch(9)).unwrap();
    assert_eq!(a, Instance::draw(&net, &PerturbationSpec::mismatch(9)).unwrap());
    assert_ne!(a, Instance::draw(&net, &PerturbationSpec::mismatch(10)).unwrap());
    let z = Instance::draw(&net, &PerturbationSpec::leakage_only()).unwrap();
    let nominal = Instance::nominal(&net);
    assert_eq!(z.mirror_gain, nominal.mirror_gain);
    assert_eq!(z.cells, nominal.cells);
    let ff = Instance::draw(&net, &PerturbationSpec::leakage_only().with_corner(Corner::FF)).unwrap();
    assert!((ff.cells[0].i_thresh / net.cells[0].i_thresh - 0.92).abs() < 1e-12);
    assert!((ff.cells[0].i_gain / net.cells[0].i_gain - 1.08).abs() < 1e-12);
    assert_eq!("ss".parse::<Corner>().unwrap(), Corner::SS);
}

#[test]
fn leakage_replaces_zero_outputs() {
    let m = switching_model(6, 4);
    let net = compile(&m, None).unwrap();
    let seq = to_currents(&random_seq(7, 40, 3));
    let ideal = simulate(&net, &seq, &SimOptions::default()).unwrap();
    let leaky = simulate(&net, &seq, &SimOptions::perturbed(PerturbationSpec::leakage_only())).unwrap();
    let (a, b) = (ideal.get("layer1.state").unwrap(), leaky.get("layer1.state").unwrap());
    for (x, y) in a.data().iter().zip(b.data()) {
        if *x == 0.0 {
            assert_eq!(*y, DEFAULT_LEAKAGE_PA);
        } else {
            assert_eq!(x, y);
        }
    }
}

#[test]
fn noise_inside_margins_never_reaches_the_state() {
    let m = switching_model(8, 4);
    let net = compile(&m, None).unwrap();
    let seqs: Vec<Tensor> = (0..4).map(|s| to_currents(&random_seq(20 + s, 50, 3))).collect();
    // smallest distance of any clean layer-2 candidate to either threshold
    let mut margin = f64::INFINITY;
    for s in &seqs {
        let tr = simulate(&net, s, &SimOptions::default()).unwrap();
        let cand = tr.get("layer2.candidate").unwrap();
        for t in 0..cand.rows() {
            for (i, c) in net.cells[4..].iter().enumerate() {
                let v = cand.get(t, i);
                margin = margin.min((v - c.i_thresh).abs()).min((v - c.i_lower()).abs());
            }
        }
    }
    assert!(margin > 0.0);
    let r = measure_suppression(&net, &seqs, 2, margin / 50.0, PerturbationSpec::leakage_only(), 3).unwrap();
    assert_eq!(r.mae_state_pa, 0.0);
    assert!(r.mae_candidate_pa > 0.0);
    assert_eq!(r.ratio, r.mae_candidate_pa / DEFAULT_LEAKAGE_PA);
    let zero = measure_suppression(&net, &seqs, 2, 0.0, PerturbationSpec::leakage_only(), 3).unwrap();
    assert_eq!((zero.mae_candidate_pa, zero.mae_state_pa), (0.0, 0.0));
}

#[test]
fn trace_csv_layout() {
    let net = compile(&switching_model(9, 2), None).unwrap();
    let tr = simulate(&net, &to_currents(&random_seq(1, 3, 3)), &SimOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&tr, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,probe,value_pA\n0,input_proj[0],"));
    let rows = tr.probes.iter().map(|(_, t)| t.len()).sum::<usize>();
    assert_eq!(text.lines().count(), rows + 1);
    assert!(tr.total_power_nw() > 0.0);
    assert!(simulate(&net, &Tensor::filled(2, 3, -1.0), &SimOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn switches_only_on_crossings(
        lower in 1.0f64..400.0,
        width in 1.0f64..400.0,
        inputs in prop::collection::vec(0.0f64..1000.0, 1..200),
    ) {
        let c = BistableCellModel { i_thresh: lower + width, i_width: width, i_gain: 100.0 };
        let mut state = CellState::Off;
        for &i in &inputs {
            let (out, next) = cell_response(&c, state, i);
            match (state, next) {
                (CellState::Off, CellState::On) => prop_assert!(i > c.i_thresh),
                (CellState::On, CellState::Off) => prop_assert!(i < c.i_lower()),
                _ => prop_assert!(i >= c.i_lower() && i <= c.i_thresh || (next == CellState::On) == (i > c.i_thresh)),
            }
            prop_assert_eq!(out, if next == CellState::On { 100.0 } else { 0.0 });
            state = next;
        }
    }
}
