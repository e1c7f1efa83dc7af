use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::analog::compile;
use crate::backbone::HardwareBackbone;
use crate::cells::CellKind;
use crate::data::SyntheticTask;

fn small() -> (HardwareBackbone, crate::data::SequenceSet) {
    let task = SyntheticTask {
        t_len: 24,
        onset_max: 10,
        ..SyntheticTask::default()
    };
    let set = task.generate(12, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = HardwareBackbone::init(CellKind::FqBmru, task.d_in, 4, 2, 2, &mut rng);
    (m, set)
}

#[test]
fn median_handles_even_and_odd() {
    assert_eq!(median(&[]), None);
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
}

#[test]
fn sweep_starts_with_clean_row_and_is_deterministic() {
    let (m, set) = small();
    let cfg = NoiseSweepConfig {
        levels: vec![1.0, 4.0],
        instantiations: 2,
        ..NoiseSweepConfig::default()
    };
    let a = noise_sweep(&[("fq", &m)], &set, &cfg).unwrap();
    let b = noise_sweep(&[("fq", &m)], &set, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
    assert_eq!(a[0].level, 0.0);
    assert_eq!(a[0].accuracy, crate::quant::accuracy(&m, &set).unwrap());
    let mut buf = Vec::new();
    write_sweep_csv(&a, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("variant,level,accuracy\n"));
}

#[test]
fn sweep_rejects_bad_config() {
    let (m, set) = small();
    let cfg = NoiseSweepConfig {
        levels: vec![0.0],
        ..NoiseSweepConfig::default()
    };
    assert!(noise_sweep(&[("fq", &m)], &set, &cfg).is_err());
}

#[test]
fn probe_rms_covers_noise_sites() {
    let (m, set) = small();
    let rms = probe_rms(&m, &set, 5).unwrap();
    for name in ["input_proj", "layer1.candidate", "layer2.candidate", "layer1.fc", "logits"] {
        assert!(rms.contains_key(name), "{name}");
    }
}

#[test]
fn zero_sigma_never_flips() {
    let (m, set) = small();
    let net = compile(&m, None).unwrap();
    let run = MismatchRun {
        samples: 3,
        mirror_sigma: 0.0,
        thresh_sigma: 0.0,
        gain_sigma: 0.0,
        leakage_pa: 0.0,
        seed: 1,
    };
    let rep = mismatch_mc(&net, &set.seqs[..4], &run).unwrap();
    assert!(rep.records.iter().all(|r| r.impaired_rate == 0.0));
    assert_eq!(rep.predictions.len(), 3);
}

#[test]
fn mismatch_is_reproducible() {
    let (m, set) = small();
    let net = compile(&m, None).unwrap();
    let run = MismatchRun {
        samples: 4,
        seed: 9,
        ..MismatchRun::default()
    };
    let a = mismatch_mc(&net, &set.seqs[..4], &run).unwrap();
    let b = mismatch_mc(&net, &set.seqs[..4], &run).unwrap();
    assert_eq!(a, b);
    let mut buf = Vec::new();
    write_draws_csv(&a, &run, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.starts_with("draw,seed,n_flipped,predictions\n"));
    let mut buf = Vec::new();
    write_mismatch_csv(&a, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("sample_id,margin,impaired_rate\n"));
}

#[test]
fn margin_selection_spans_ranks() {
    let (m, set) = small();
    let net = compile(&m, None).unwrap();
    let idx = select_by_margin(&net, &set.seqs, 4).unwrap();
    assert_eq!(idx.len(), 4);
    let margins: Vec<usize> = idx
        .iter()
        .map(|&i| {
            let tr = crate::analog::simulate(&net, &crate::analog::to_currents(&set.seqs[i]), &Default::default()).unwrap();
            crate::backbone::vote_margin(tr.logits())
        })
        .collect();
    assert!(margins.windows(2).all(|w| w[0] <= w[1]));
    assert!(select_by_margin(&net, &set.seqs, 0).is_err());
    assert!(select_by_margin(&net, &set.seqs, 13).is_err());
}
