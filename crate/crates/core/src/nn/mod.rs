//! Small dense neural-network toolkit: tensors, layers with explicit backward
//! passes, sigmoid cross-entropy, Adam and a finite-difference checker.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod params;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{BatchNorm, BatchNormCache, Dense, Embedding, Mode, Pool2d};
pub use params::{prefixed, prefixed_mut, Block, Params, TensorSet};
pub use tensor::{Scalar, Tensor};
