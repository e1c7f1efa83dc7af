use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fqbmru::analog::{compile, simulate, to_currents, SimOptions};
use fqbmru::autodiff::{GradStore, Tape};
use fqbmru::backbone::{time_major, DropoutSite, ForwardCtx, HardwareBackbone, SequenceModel};
use fqbmru::cells::{init_fq_bmru, scan_parallel, scan_sequential, Cell, CellKind, DEFAULT_BLOCK};
use fqbmru::data::SyntheticTask;
use fqbmru::Tensor;

fn inputs(t: usize, n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(t, n, (0..t * n).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap()
}

fn scan(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = c.benchmark_group("fq_scan");
    for t in [256, 1024, 4096] {
        let cell = Cell::FqBmru(init_fq_bmru(32, 16, &mut rng));
        let x = inputs(t, 16, &mut rng);
        let h0 = vec![0.0; 32];
        g.bench_with_input(BenchmarkId::new("sequential", t), &x, |b, x| {
            b.iter(|| scan_sequential(&cell, x, &h0, 0.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("parallel", t), &x, |b, x| {
            b.iter(|| scan_parallel(&cell, x, &h0, DEFAULT_BLOCK).unwrap())
        });
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = HardwareBackbone::init(CellKind::FqBmru, 13, 8, 2, 2, &mut rng);
    let set = SyntheticTask::default().generate(64, 3).unwrap();
    let seqs: Vec<&Tensor> = set.seqs.iter().collect();
    let x = time_major(&seqs).unwrap();
    let labels: Vec<usize> = (0..set.t_len()).flat_map(|_| set.labels.iter().copied()).collect();
    c.bench_function("train_step_d8_batch64", |b| {
        b.iter(|| {
            let tape = Tape::new();
            let mut step_rng = ChaCha8Rng::seed_from_u64(3);
            let loss = {
                let mut ctx = ForwardCtx::train(&tape, 0.5, 0.1, DropoutSite::CellInput, &mut step_rng);
                let logits = model.forward(&mut ctx, tape.constant(x.clone()), seqs.len()).unwrap();
                logits.cross_entropy(&labels).unwrap()
            };
            let mut grads = GradStore::new();
            tape.backward(loss, &mut grads).unwrap();
            grads
        })
    });
}

fn sim_frame(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = HardwareBackbone::init(CellKind::FqBmru, 13, 8, 2, 2, &mut rng);
    let net = compile(&model, None).unwrap();
    let seq = to_currents(&SyntheticTask::default().generate(1, 5).unwrap().seqs[0]);
    let opts = SimOptions::default();
    c.bench_function("simulate_101_frames_d8", |b| b.iter(|| simulate(&net, &seq, &opts).unwrap()));
}

criterion_group!(benches, scan, train_step, sim_frame);
criterion_main!(benches);
