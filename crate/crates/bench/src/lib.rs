//! Criterion benchmarks for the map kernels live under `benches/`.
