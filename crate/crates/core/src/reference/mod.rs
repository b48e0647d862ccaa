//! Independent reference implementations used by the self-check suites and the
//! tests: an unbounded-precision interval coder and exact rational metrics.

pub mod codec;
pub mod metrics;
