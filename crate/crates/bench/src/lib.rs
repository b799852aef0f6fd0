//! Benchmark-only package; the measurements live in `benches/solver.rs`.
//! Keeping them out of the library crates means `cargo build` never pays
//! for the criterion harness.
