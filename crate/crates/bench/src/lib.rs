//! Benchmark-only crate: the measurements live in `benches/hot_paths.rs`
//! and exercise `leggett-core` directly. There is no library code here.
