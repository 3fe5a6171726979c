//! Holds the `acceptance` test target. The package name sorts after the
//! other workspace members so `cargo test --workspace` runs the suite last.
