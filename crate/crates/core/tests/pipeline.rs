use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fqbmru::analog::{compile, simulate, to_currents, CircuitNetlist, SimOptions, PA_PER_UNIT};
use fqbmru::analysis::{noise_sweep, NoiseSweepConfig};
use fqbmru::backbone::{majority_vote, AnyModel, ArchSpec, HardwareBackbone};
use fqbmru::cells::CellKind;
use fqbmru::data::{read_fseq_file, SyntheticTask};
use fqbmru::quant::{quantize, QuantSpec};
use fqbmru::training::{load_checkpoint, save_checkpoint, train, CheckpointMeta, TrainConfig, CHECKPOINT_FORMAT};

fn fixture() -> fqbmru::data::SequenceSet {
    read_fseq_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/desk_eval.fseq")).unwrap()
}

#[test]
fn fixture_matches_generator() {
    let fix = fixture();
    let gen = SyntheticTask::default().generate(64, 4).unwrap();
    assert_eq!(fix.labels, gen.labels);
    for (a, b) in fix.seqs.iter().zip(&gen.seqs) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
}

#[test]
fn checkpoint_netlist_simulation_chain() {
    let dir = tempfile::tempdir().unwrap();
    let arch = ArchSpec::Hardware {
        cell: CellKind::FqBmru,
        n_in: 13,
        d: 4,
        n_layers: 2,
        n_classes: 2,
    };
    let set = fixture();
    let cfg = TrainConfig {
        max_iters: 30,
        batch: 16,
        eval_every: 10,
        eval_batches: 2,
        ..TrainConfig::desk(5)
    };
    let out = train(arch.build(5), &set, &set, &cfg).unwrap();
    let path = dir.path().join("m.bmru");
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.into(),
        arch,
        config: Some(cfg),
        iteration: out.best.iter,
        val_loss: out.best.val_loss,
        val_accuracy: out.best.val_accuracy,
        eps: out.best.eps,
    };
    save_checkpoint(&path, &out.best.model, &meta).unwrap();
    let (loaded, meta2) = load_checkpoint(&path).unwrap();
    assert_eq!(meta, meta2);
    assert_eq!(loaded, out.best.model);

    let hw = loaded.as_hardware().unwrap();
    for bits in [None, Some(4)] {
        let spec = bits.map(|b| QuantSpec::new(b).unwrap());
        let net = CircuitNetlist::from_json(&compile(hw, spec).unwrap().to_json().unwrap()).unwrap();
        let reference = match spec {
            Some(s) => quantize(hw, s).unwrap(),
            None => hw.clone(),
        };
        for seq in set.seqs.iter().take(8) {
            let sw = reference.forward_hw(seq).unwrap();
            let tr = simulate(&net, &to_currents(seq), &SimOptions::default()).unwrap();
            for ((name, a), (_, b)) in sw.probes.iter().zip(&tr.probes) {
                let worst = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| (x * PA_PER_UNIT - y).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 1e-9, "{name}: {worst}");
            }
            assert_eq!(majority_vote(sw.logits()), majority_vote(tr.logits()));
        }
    }
}

#[test]
fn software_backbone_checkpoint_is_not_compiled() {
    let arch = ArchSpec::Software {
        cell: CellKind::Lru,
        n_in: 13,
        m: 8,
        r: 1,
        d: 4,
        n_classes: 2,
    };
    let model = arch.build(1);
    assert!(matches!(model, AnyModel::Software(_)));
    assert!(model.as_hardware().is_none());
}

/// Accuracy falls with the noise level when draws are shared across levels.
#[test]
fn noise_sweep_is_monotone_for_a_trained_lru() {
    let task = SyntheticTask::default();
    let train_set = task.generate(1000, 1).unwrap();
    let val = task.generate(256, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = HardwareBackbone::init(CellKind::Lru, 13, 8, 2, 2, &mut rng);
    let cfg = TrainConfig {
        max_iters: 300,
        eps_schedule: None,
        ..TrainConfig::desk(2)
    };
    let lru = train(model, &train_set, &val, &cfg).unwrap().best.model;
    let levels = vec![0.5, 1.0, 2.0, 4.0];
    let set = fixture();
    let mut mean = vec![0.0; levels.len() + 1];
    for seed in 0..10 {
        let rows = noise_sweep(
            &[("lru", &lru)],
            &set,
            &NoiseSweepConfig {
                levels: levels.clone(),
                instantiations: 2,
                seed,
                ..NoiseSweepConfig::default()
            },
        )
        .unwrap();
        for (m, r) in mean.iter_mut().zip(&rows) {
            *m += r.accuracy / 10.0;
        }
    }
    for w in mean.windows(2) {
        assert!(w[1] <= w[0] + 0.02, "{mean:?}");
    }
}
