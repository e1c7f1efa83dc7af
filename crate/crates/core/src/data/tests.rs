use proptest::prelude::*;

use super::*;

fn tiny_images() -> IdxImages {
    IdxImages {
        n: 2,
        rows: 2,
        cols: 3,
        pixels: vec![0, 1, 2, 3, 4, 255, 255, 128, 0, 7, 8, 9],
    }
}

#[test]
fn idx_fixture_round_trips() {
    let imgs = tiny_images();
    let bytes = write_idx_images(&imgs);
    assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
    assert_eq!(parse_idx_images(&bytes).unwrap(), imgs);
    let labels = vec![3u8, 9];
    assert_eq!(parse_idx_labels(&write_idx_labels(&labels)).unwrap(), labels);
}

#[test]
fn idx_wrong_magic_names_both() {
    let bytes = write_idx_labels(&[1, 2]);
    let err = parse_idx_images(&bytes).unwrap_err().to_string();
    assert!(err.contains("0x00000803") && err.contains("0x00000801"), "{err}");
}

#[test]
fn idx_truncation_reports_offset() {
    let bytes = write_idx_images(&tiny_images());
    match parse_idx_images(&bytes[..bytes.len() - 1]) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, bytes.len() as u64 - 1),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_idx_images(&bytes[..6]), Err(Error::Format { offset: 4, .. })));
}

#[test]
fn idx_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (pi, pl) = (dir.path().join("i"), dir.path().join("l"));
    std::fs::write(&pi, write_idx_images(&tiny_images())).unwrap();
    std::fs::write(&pl, write_idx_labels(&[1, 2, 3])).unwrap();
    assert!(matches!(load_idx(&pi, &pl), Err(Error::Data(_))));
    std::fs::write(&pl, write_idx_labels(&[1, 2])).unwrap();
    assert!(load_idx(&pi, &pl).is_ok());
}

#[test]
fn pixel_modes() {
    let imgs = tiny_images();
    let labels = [3u8, 9];
    let rows = pixel_task(&imgs, &labels, PixelMode::Row28).unwrap();
    assert_eq!(rows.seqs[0].shape(), &[2, 3]);
    assert_eq!(rows.seqs[0].get(1, 2), 1.0);
    let raster = pixel_task(&imgs, &labels, PixelMode::Raster784).unwrap();
    assert_eq!(raster.seqs[1].shape(), &[6, 1]);
    assert_eq!(raster.seqs[1].get(0, 0), 1.0);
    let perm = pixel_task(&imgs, &labels, PixelMode::Permuted(5)).unwrap();
    let p = make_permutation_n(6, 5);
    for i in 0..2 {
        for (k, &src) in p.iter().enumerate() {
            assert_eq!(perm.seqs[i].get(k, 0), raster.seqs[i].get(src, 0));
        }
    }
    assert_eq!(normalize_pixel(255), 1.0);
    assert_eq!(normalize_pixel(0), 0.0);
}

#[test]
fn permutation_is_bijection_and_seeded() {
    let mut p = make_permutation(3);
    assert_eq!(p, make_permutation(3));
    assert_ne!(p, make_permutation(4));
    p.sort_unstable();
    assert_eq!(p, (0..784).collect::<Vec<_>>());
    let distinct = (0..20u64)
        .map(make_permutation)
        .collect::<std::collections::HashSet<_>>()
        .len();
    assert_eq!(distinct, 20);
}

#[test]
fn fseq_round_trip_is_bit_exact() {
    let set = SyntheticTask::default().generate(7, 1).unwrap();
    let bytes = write_fseq(&set).unwrap();
    let back = read_fseq(&bytes).unwrap();
    assert_eq!(write_fseq(&back).unwrap(), bytes);
    assert_eq!(back.labels, set.labels);
    for (a, b) in back.seqs.iter().zip(&set.seqs) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
}

#[test]
fn fseq_rejects_bad_input() {
    let set = SyntheticTask::default().generate(2, 1).unwrap();
    let bytes = write_fseq(&set).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'G';
    assert!(matches!(read_fseq(&bad), Err(Error::Format { offset: 0, .. })));
    assert!(matches!(read_fseq(&bytes[..bytes.len() - 4]), Err(Error::Format { .. })));
    let mut nan = bytes.clone();
    nan[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(read_fseq(&nan), Err(Error::Format { offset: 28, .. })));
}

#[test]
fn kws_split_is_balanced() {
    let set = SyntheticTask { n_classes: 4, ..Default::default() }.generate(40, 2).unwrap();
    let split = balanced_kws_split(&set, 2, 9).unwrap();
    assert_eq!(split.class_counts(), vec![10, 10]);
    assert_eq!(split, balanced_kws_split(&set, 2, 9).unwrap());
    let negs: Vec<&Tensor> = split.seqs[10..].iter().collect();
    for i in 0..negs.len() {
        for j in i + 1..negs.len() {
            assert_ne!(negs[i], negs[j]);
        }
    }
    let only_pos = set.subset(&[0]);
    assert!(balanced_kws_split(&only_pos, set.labels[0], 1).is_err());
}

#[test]
fn split_and_batches_partition() {
    let set = SyntheticTask::default().generate(50, 3).unwrap();
    let (tr, va) = set.split(0.2, 1).unwrap();
    assert_eq!((tr.len(), va.len()), (40, 10));
    let b = set.batches(16, 4);
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![16, 16, 16, 2]);
    let mut all: Vec<usize> = b.concat();
    all.sort_unstable();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
}

/// Sums the features only the keyword uses: background alone stays at or
/// below `background` per feature, a keyword frame at the envelope peak adds
/// at least amp_lo times the smallest template weight.
fn oracle(task: &SyntheticTask, x: &Tensor) -> bool {
    let tpl = task.templates();
    let private: Vec<usize> = (0..task.d_in).filter(|&f| tpl[1][f] > 0.0 && tpl[0][f] == 0.0).collect();
    assert!(!private.is_empty());
    let cut = private.len() as f64 * (task.background + 0.5 * task.amp_lo * 0.6);
    (0..x.rows()).any(|t| private.iter().map(|&f| x.get(t, f)).sum::<f64>() > cut)
}

#[test]
fn synthetic_task_is_separable_by_construction() {
    let task = SyntheticTask::default();
    let set = task.generate(400, 11).unwrap();
    assert_eq!(set.class_counts(), vec![200, 200]);
    for (x, &l) in set.seqs.iter().zip(&set.labels) {
        assert!(x.data().iter().all(|&v| v >= 0.0));
        assert_eq!(oracle(&task, x), l > 0);
    }
    assert_eq!(set, task.generate(400, 11).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fseq_identity_on_f32_payload(vals in prop::collection::vec(-1e6f32..1e6, 12), label in 0usize..3) {
        let t = Tensor::from_vec(4, 3, vals.iter().map(|&v| v as f64).collect()).unwrap();
        let set = SequenceSet::new(vec![t], vec![label], 3).unwrap();
        let back = read_fseq(&write_fseq(&set).unwrap()).unwrap();
        prop_assert_eq!(back, set);
    }
}
