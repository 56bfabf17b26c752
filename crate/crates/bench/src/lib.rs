//! Criterion benchmarks for the fracopt kernels; see `benches/`.
