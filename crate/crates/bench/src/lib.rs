//! Benchmarks for the control loop live under `benches/`.
