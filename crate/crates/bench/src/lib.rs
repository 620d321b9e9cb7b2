//! Benchmarks for sos-core live in `benches/`.
