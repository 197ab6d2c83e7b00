//! Criterion benchmarks for the hot paths of `latentpriv`; see `benches/`.
//!
//! Run with `cargo bench -p latentpriv-bench`.
