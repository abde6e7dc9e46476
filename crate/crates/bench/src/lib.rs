//! Criterion benchmarks for rule construction, design matrices and the
//! feature-space likelihood. Run with `cargo bench -p tqff-bench`.
