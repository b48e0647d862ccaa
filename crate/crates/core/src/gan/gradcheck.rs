//! Finite-difference check of both coupled training objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GanConfig;
use super::model::CoupledGan;
use crate::nn::gradcheck::{check_gradients, GradReport, DEFAULT_FLOOR, DEFAULT_STEP};
use crate::nn::{Mode, Params, Tensor};
use crate::Result;

pub struct CoupledReport {
    pub generator: GradReport,
    pub discriminator: GradReport,
}

impl CoupledReport {
    pub fn max_rel_error(&self) -> f64 {
        self.generator.max_rel_error.max(self.discriminator.max_rel_error)
    }
}

/// Compares the analytic gradients of the generator and discriminator
/// objectives of a 64-bit model built from `cfg` with central differences,
/// on a random batch of `batch` examples. Every block is checked.
pub fn coupled_gradient_check(cfg: &GanConfig, batch: usize, seed: u64) -> Result<CoupledReport> {
    let mut model = CoupledGan::<f64>::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Zero biases behind dead units sit exactly on a ReLU kink; move to a generic point.
    for (_, t) in model.blocks_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
    }
    let y: Vec<usize> = (0..batch).map(|_| rng.random_range(0..cfg.n_segments)).collect();
    let mut signs = || {
        Tensor::from_vec(
            &[batch, cfg.cells()],
            (0..batch * cfg.cells()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        )
    };
    let real = [signs(), signs()];
    let z = Tensor::from_vec(
        &[batch, cfg.z_dim],
        (0..batch * cfg.z_dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
    );
    let mask_seed = rng.random::<u64>();

    // Generator objective; the dropout masks are fixed by reseeding.
    let pass = model.generator_forward(&z, &y, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
    let mut grad = model.zeroed();
    model.generator_objective(&pass, Some(&mut grad))?;
    let g_loss = |m: &CoupledGan<f64>| {
        let p = m
            .generator_forward(&z, &y, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))
            .expect("shapes checked above");
        m.generator_objective(&p, None).expect("shapes checked above")
    };
    let generator = check_gradients(&model, &grad, g_loss, DEFAULT_STEP, DEFAULT_FLOOR);

    // Discriminator objective against fixed fakes: generator blocks get zero.
    let fake = pass.outputs.clone();
    let smooth = cfg.label_smooth;
    let mut grad = model.zeroed();
    model.discriminator_objective([&real[0], &real[1]], [&fake[0], &fake[1]], &y, smooth, Some(&mut grad))?;
    let d_loss = |m: &CoupledGan<f64>| {
        m.discriminator_objective([&real[0], &real[1]], [&fake[0], &fake[1]], &y, smooth, None)
            .expect("shapes checked above")
            .loss
    };
    let discriminator = check_gradients(&model, &grad, d_loss, DEFAULT_STEP, DEFAULT_FLOOR);
    Ok(CoupledReport {
        generator,
        discriminator,
    })
}
