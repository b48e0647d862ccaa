use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Input data violates a structural invariant (duplicate catalog entry, bad shapes, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The arithmetic code for a row does not fit into the configured width.
    #[error(
        "code overflow in row {row}: {needed} bits needed but width is {width} \
         (row length {len}, {ones} ones, density {density:.4})"
    )]
    CodeOverflow {
        row: usize,
        needed: usize,
        width: usize,
        len: usize,
        ones: usize,
        density: f64,
    },

    /// Malformed binary artifact (bad magic, truncated payload, ...).
    #[error("format error: {0}")]
    Format(String),

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    /// Every realization was degenerate for the requested metric.
    #[error("metric `{metric}` undefined: all {skipped} realizations skipped")]
    UndefinedMetric { metric: &'static str, skipped: usize },

    #[error("contract violation: {0}")]
    Contract(String),
}
