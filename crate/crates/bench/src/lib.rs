//! Benchmark helpers live in the bench targets; the crate itself is empty.
