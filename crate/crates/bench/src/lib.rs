//! Criterion benchmarks for `mftrack-core`. See `benches/`.
