//! Criterion benchmarks for the detection toolkit; see `benches/`.
