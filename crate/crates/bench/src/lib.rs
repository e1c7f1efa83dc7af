//! Criterion benchmarks for the scan, a training step and circuit simulation; see `benches/`.
