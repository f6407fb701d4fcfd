//! Criterion benchmarks for the `srp-core` kernels live in `benches/`.
