//! Benchmark support targets live in `benches/`; run them with
//! `cargo bench -p adkit-bench`.
