//! Benchmarks for wgklm live in `benches/`; run them with `cargo bench -p wgklm-bench`.
