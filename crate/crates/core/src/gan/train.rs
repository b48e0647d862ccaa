use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::count::Net;
use super::model::CoupledGan;
use crate::codec::CodedDataset;
use crate::nn::{Adam, Mode, Params, Tensor};
use crate::{Error, Result};

/// One coded example scaled to {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub segment: usize,
    pub first: Vec<f32>,
    pub second: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub rows: usize,
    pub width: usize,
    pub examples: Vec<Example>,
}

fn scale(bits: &[u8]) -> Vec<f32> {
    bits.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect()
}

impl TrainingSet {
    pub fn from_coded(data: &CodedDataset) -> Self {
        TrainingSet {
            rows: data.rows,
            width: data.width,
            examples: data
                .records
                .iter()
                .map(|r| Example {
                    segment: r.segment,
                    first: scale(r.first.bits()),
                    second: scale(r.second.bits()),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let cells = self.rows * self.width;
        let mut x1 = Vec::with_capacity(indices.len() * cells);
        let mut x2 = Vec::with_capacity(indices.len() * cells);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            let e = &self.examples[i];
            x1.extend_from_slice(&e.first);
            x2.extend_from_slice(&e.second);
            y.push(e.segment);
        }
        let shape = [indices.len(), cells];
        Batch {
            real: [Tensor::from_vec(&shape, x1), Tensor::from_vec(&shape, x2)],
            segments: y,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub real: [Tensor<f32>; 2],
    pub segments: Vec<usize>,
}

/// Per-epoch training record. Batch statistics are averaged over the steps
/// of the epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epoch: usize,
    pub steps: usize,
    pub real_mean: [f64; 2],
    pub real_std: [f64; 2],
    pub fake_mean: [f64; 2],
    pub fake_std: [f64; 2],
    pub d_accuracy: [f64; 2],
    pub d_loss: f64,
    pub g_loss: f64,
}

impl TrainStats {
    fn empty(epoch: usize) -> Self {
        TrainStats {
            epoch,
            steps: 0,
            real_mean: [0.0; 2],
            real_std: [0.0; 2],
            fake_mean: [0.0; 2],
            fake_std: [0.0; 2],
            d_accuracy: [0.0; 2],
            d_loss: 0.0,
            g_loss: 0.0,
        }
    }

    fn accumulate(&mut self, s: &TrainStats) {
        self.steps += 1;
        for k in 0..2 {
            self.real_mean[k] += s.real_mean[k];
            self.real_std[k] += s.real_std[k];
            self.fake_mean[k] += s.fake_mean[k];
            self.fake_std[k] += s.fake_std[k];
            self.d_accuracy[k] += s.d_accuracy[k];
        }
        self.d_loss += s.d_loss;
        self.g_loss += s.g_loss;
    }

    fn finish(mut self) -> Self {
        let n = self.steps.max(1) as f64;
        for k in 0..2 {
            self.real_mean[k] /= n;
            self.real_std[k] /= n;
            self.fake_mean[k] /= n;
            self.fake_std[k] /= n;
            self.d_accuracy[k] /= n;
        }
        self.d_loss /= n;
        self.g_loss /= n;
        self
    }
}

/// Separate Adam states for the discriminator and generator weights.
#[derive(Clone, Debug)]
pub struct Optimizers {
    pub discriminator: Adam<f32>,
    pub generator: Adam<f32>,
}

impl Optimizers {
    pub fn new(model: &CoupledGan<f32>) -> Self {
        Optimizers {
            discriminator: Adam::new(model.config.adam),
            generator: Adam::new(model.config.adam),
        }
    }
}

/// Standard-normal latent batch.
pub fn sample_latent<R: Rng + ?Sized>(batch: usize, z_dim: usize, rng: &mut R) -> Tensor<f32> {
    let data = (0..batch * z_dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::from_vec(&[batch, z_dim], data)
}

fn guard(step: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            detail: format!("{what} is {v}"),
        })
    }
}

/// One discriminator update followed by one generator update.
///
/// The generator runs once in training mode; its output is the fake batch for
/// the discriminator update and is then scored by the updated, frozen
/// discriminators for the generator update. `step` only labels diagnostics.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut CoupledGan<f32>,
    opt: &mut Optimizers,
    batch: &Batch,
    z: &Tensor<f32>,
    rng: &mut R,
    step: usize,
) -> Result<TrainStats> {
    let y = &batch.segments;
    let pass = model.generator_forward(z, y, Mode::Train, rng)?;
    let mut grad = model.zeroed();
    let real = [&batch.real[0], &batch.real[1]];
    let fake = [&pass.outputs[0], &pass.outputs[1]];
    let d = model.discriminator_objective(real, fake, y, model.config.label_smooth, Some(&mut grad))?;
    guard(step, "discriminator loss", d.loss)?;
    let grads = grad.net_trainable(Net::Discriminator);
    opt.discriminator.step(model.net_trainable_mut(Net::Discriminator), grads);

    let mut grad = model.zeroed();
    let g_loss = model.generator_objective(&pass, Some(&mut grad))?;
    guard(step, "generator loss", g_loss)?;
    let grads = grad.net_trainable(Net::Generator);
    opt.generator.step(model.net_trainable_mut(Net::Generator), grads);
    model.update_running_stats(&pass);

    if !model.net_trainable(Net::Generator).iter().all(|t| t.all_finite())
        || !model.net_trainable(Net::Discriminator).iter().all(|t| t.all_finite())
    {
        return Err(Error::Divergence {
            step,
            detail: "non-finite weights after update".into(),
        });
    }
    Ok(TrainStats {
        epoch: 0,
        steps: 1,
        real_mean: [batch.real[0].mean(), batch.real[1].mean()],
        real_std: [batch.real[0].std(), batch.real[1].std()],
        fake_mean: [pass.outputs[0].mean(), pass.outputs[1].mean()],
        fake_std: [pass.outputs[0].std(), pass.outputs[1].std()],
        d_accuracy: d.accuracy,
        d_loss: d.loss,
        g_loss,
    })
}

/// Steps per epoch: one pass worth of batches, at least one.
pub fn steps_per_epoch(examples: usize, batch_size: usize) -> usize {
    (examples / batch_size).max(1)
}

/// Trains for `config.epochs` epochs of uniformly drawn batches (indices with
/// replacement), or until `config.max_steps`. Writes `epoch_NNNNN.rgan` into
/// `checkpoint_dir` every `config.checkpoint_every` epochs.
pub fn train(model: &mut CoupledGan<f32>, data: &TrainingSet, checkpoint_dir: Option<&Path>) -> Result<Vec<TrainStats>> {
    let cfg = model.config.clone();
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if data.rows != cfg.rows || data.width != cfg.width {
        return Err(Error::Validation(format!(
            "training data is {}x{} but the model expects {}x{}",
            data.rows, data.width, cfg.rows, cfg.width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Optimizers::new(model);
    let per_epoch = steps_per_epoch(data.len(), cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    'epochs: for epoch in 1..=cfg.epochs {
        let mut stats = TrainStats::empty(epoch);
        for _ in 0..per_epoch {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                if stats.steps > 0 {
                    history.push(stats.finish());
                }
                break 'epochs;
            }
            let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..data.len())).collect();
            let batch = data.batch(&idx);
            let z = sample_latent(cfg.batch_size, cfg.z_dim, &mut rng);
            let s = train_step(model, &mut opt, &batch, &z, &mut rng, step)?;
            stats.accumulate(&s);
            step += 1;
        }
        history.push(stats.finish());
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                std::fs::create_dir_all(dir)?;
                let f = std::fs::File::create(dir.join(format!("epoch_{epoch:05}.rgan")))?;
                save_checkpoint(std::io::BufWriter::new(f), model)?;
            }
        }
    }
    Ok(history)
}
