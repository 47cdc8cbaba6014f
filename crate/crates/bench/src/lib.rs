//! Criterion benchmarks for the hot paths of `fsc-core`; see `benches/`.
