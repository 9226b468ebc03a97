//! Criterion benchmarks for the tracking and simulation hot paths; see `benches/`.
