//! Acceptance checks for the workspace live in `tests/acceptance.rs`; this
//! crate has no library code. It is a separate package so the checks run
//! after every other test target.
