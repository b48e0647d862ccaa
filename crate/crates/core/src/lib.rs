pub mod codec;
pub mod error;
pub mod eval;
pub mod gan;
pub mod ingest;
pub mod nn;
pub mod recgen;
pub mod reference;
pub mod synth;

pub use error::{Error, Result};
