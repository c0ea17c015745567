//! Criterion benchmarks for schmidt-core live in `benches/`; run them with
//! `cargo bench -p schmidt-bench`.
