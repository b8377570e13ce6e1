//! Criterion benchmarks for `mrac-core`; see `benches/`.
