//! Coupled conditional GAN over coded interaction matrices.

pub mod checkpoint;
pub mod config;
pub mod count;
pub mod gradcheck;
pub mod model;
pub mod train;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, RGAN_MAGIC, RGAN_VERSION};
pub use config::GanConfig;
pub use gradcheck::{coupled_gradient_check, CoupledReport};
pub use count::{block_specs, param_count, BlockSpec, Convention, Net, ParamCount};
pub use model::{build_model, CoupledGan, DiscEval, GenLayer, GenPass};
pub use train::{sample_latent, steps_per_epoch, train, train_step, Batch, Example, Optimizers, TrainStats, TrainingSet};

#[cfg(test)]
mod tests;
