//! Criterion benchmarks for hgssl; see `benches/`.
