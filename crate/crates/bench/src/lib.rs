//! Criterion benchmarks for the tes-jitter pipeline live in `benches/`.
