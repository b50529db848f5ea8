//! Criterion benchmarks for the `viscojoint` kernels; see `benches/`.
