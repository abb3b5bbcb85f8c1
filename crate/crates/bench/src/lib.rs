//! Criterion benchmarks for the cPSE pipeline live in `benches/`.
