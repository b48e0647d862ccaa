use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GanConfig;
use super::count::{count_blocks, Convention, Net, ParamCount};
use crate::nn::layers::{
    avgpool2d, avgpool2d_backward, dropout, dropout_backward, multiply, multiply_backward, relu,
    relu_backward, tanh, tanh_backward,
};
use crate::nn::loss::sigmoid_xent_mean;
use crate::nn::{
    prefixed, prefixed_mut, BatchNorm, BatchNormCache, Block, Dense, Embedding, Mode, Params, Pool2d, Scalar, Tensor,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GenLayer<T> {
    pub dense: Dense<T>,
    pub bn: BatchNorm<T>,
}

/// Two generators and two discriminators. The generators share one segment
/// embedding and one hidden trunk; the discriminators share one hidden trunk.
/// Shared parts exist once, so both paths always see the same weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledGan<T> {
    pub config: GanConfig,
    pub g_embed: Embedding<T>,
    pub g_shared: Vec<GenLayer<T>>,
    pub g_heads: [Dense<T>; 2],
    pub d_embed: [Embedding<T>; 2],
    pub d_shared: Vec<Dense<T>>,
    pub d_heads: [Dense<T>; 2],
}

#[derive(Clone, Debug)]
struct GenLayerCache<T> {
    input: Tensor<T>,
    pre: Tensor<T>,
    bn: Option<BatchNormCache<T>>,
    mask: Option<Tensor<T>>,
}

/// Intermediate values of one generator pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GenPass<T> {
    y: Vec<usize>,
    z: Tensor<T>,
    embed: Tensor<T>,
    layers: Vec<GenLayerCache<T>>,
    trunk_out: Tensor<T>,
    /// Generated batches `[batch, rows * width]`, one per channel.
    pub outputs: [Tensor<T>; 2],
}

#[derive(Clone, Debug)]
pub struct DiscPass<T> {
    head: usize,
    y: Vec<usize>,
    mask: Tensor<T>,
    input: Tensor<T>,
    trunk_in: Vec<Tensor<T>>,
    trunk_pre: Vec<Tensor<T>>,
    trunk_out: Tensor<T>,
    pub logits: Tensor<T>,
}

/// Discriminator loss and per-head accuracy on a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscEval {
    pub loss: f64,
    pub accuracy: [f64; 2],
}

impl<T: Scalar> CoupledGan<T> {
    /// Randomly initialized model: Glorot-uniform dense layers, uniform
    /// embeddings, everything drawn from a generator seeded with `cfg.seed`.
    pub fn new(cfg: &GanConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let cells = cfg.cells();
        let g_embed = Embedding::uniform(cfg.n_segments, cfg.g_embed_dim, &mut rng);
        let mut prev = cfg.z_dim;
        let mut g_shared = Vec::new();
        for &w in &cfg.g_widths {
            g_shared.push(GenLayer {
                dense: Dense::glorot(prev, w, &mut rng),
                bn: BatchNorm::new(w),
            });
            prev = w;
        }
        let g_heads = [Dense::glorot(prev, cells, &mut rng), Dense::glorot(prev, cells, &mut rng)];
        let d_embed = [
            Embedding::uniform(cfg.n_segments, cells, &mut rng),
            Embedding::uniform(cfg.n_segments, cells, &mut rng),
        ];
        let mut prev = cfg.pooled_len();
        let mut d_shared = Vec::new();
        for &w in &cfg.d_widths {
            d_shared.push(Dense::glorot(prev, w, &mut rng));
            prev = w;
        }
        let d_heads = [Dense::glorot(prev, 1, &mut rng), Dense::glorot(prev, 1, &mut rng)];
        Ok(CoupledGan {
            config: cfg.clone(),
            g_embed,
            g_shared,
            g_heads,
            d_embed,
            d_shared,
            d_heads,
        })
    }

    pub fn cast<U: Scalar>(&self) -> CoupledGan<U> {
        let mut out = CoupledGan::<U>::new(&self.config).expect("config already validated");
        for ((_, dst), src) in out.blocks_mut().into_iter().zip(self.blocks()) {
            *dst = src.tensor.cast();
        }
        out
    }

    pub fn param_count(&self, convention: Convention) -> ParamCount {
        let blocks = self.blocks();
        count_blocks(blocks.iter().map(|b| (b.name.as_str(), b.tensor.len(), b.trainable)), convention)
    }

    /// Trainable tensors of one network, in block order.
    pub fn net_trainable(&self, net: Net) -> Vec<&Tensor<T>> {
        self.blocks()
            .into_iter()
            .filter(|b| b.trainable && Net::of_block(&b.name) == net)
            .map(|b| b.tensor)
            .collect()
    }

    pub fn net_trainable_mut(&mut self, net: Net) -> Vec<&mut Tensor<T>> {
        let keep: Vec<bool> = self
            .blocks()
            .iter()
            .map(|b| b.trainable && Net::of_block(&b.name) == net)
            .collect();
        self.blocks_mut()
            .into_iter()
            .zip(keep)
            .filter_map(|((_, t), k)| k.then_some(t))
            .collect()
    }

    fn check_segments(&self, y: &[usize]) -> Result<()> {
        match y.iter().find(|&&s| s >= self.config.n_segments) {
            Some(s) => Err(Error::Contract(format!(
                "segment {s} out of range (model has {} segments)",
                self.config.n_segments
            ))),
            None => Ok(()),
        }
    }

    fn pool(&self) -> Pool2d {
        Pool2d {
            window: self.config.pool_window,
            stride: self.config.pool_stride,
        }
    }

    /// Generator pass for latent batch `z` `[batch, z_dim]` and segments `y`.
    /// Dropout draws from `rng` in training mode.
    pub fn generator_forward<R: Rng + ?Sized>(
        &self,
        z: &Tensor<T>,
        y: &[usize],
        mode: Mode,
        rng: &mut R,
    ) -> Result<GenPass<T>> {
        self.check_segments(y)?;
        if z.shape() != [y.len(), self.config.z_dim] {
            return Err(Error::Contract(format!(
                "latent batch shape {:?} does not match {} segments of dimension {}",
                z.shape(),
                y.len(),
                self.config.z_dim
            )));
        }
        let embed = self.g_embed.forward(y);
        let mut h = multiply(&embed, z);
        let mut layers = Vec::with_capacity(self.g_shared.len());
        for layer in &self.g_shared {
            let pre = layer.dense.forward(&h);
            let act = relu(&pre);
            let (normed, bn) = layer.bn.forward(&act, mode);
            let (out, mask) = dropout(&normed, self.config.dropout_rate, rng, mode);
            layers.push(GenLayerCache {
                input: h,
                pre,
                bn,
                mask,
            });
            h = out;
        }
        let outputs = [tanh(&self.g_heads[0].forward(&h)), tanh(&self.g_heads[1].forward(&h))];
        Ok(GenPass {
            y: y.to_vec(),
            z: z.clone(),
            embed,
            layers,
            trunk_out: h,
            outputs,
        })
    }

    /// Accumulates generator gradients for upstream gradients `d_out` on the
    /// two outputs. Requires a training-mode pass.
    pub fn generator_backward(&self, pass: &GenPass<T>, d_out: [&Tensor<T>; 2], grad: &mut CoupledGan<T>) {
        let mut dh = pass.trunk_out.zeros_like();
        for k in 0..2 {
            let d_pre = tanh_backward(&pass.outputs[k], d_out[k]);
            dh.add_assign(&self.g_heads[k].backward(&pass.trunk_out, &d_pre, &mut grad.g_heads[k]));
        }
        for (i, layer) in self.g_shared.iter().enumerate().rev() {
            let cache = &pass.layers[i];
            let bn_cache = cache.bn.as_ref().expect("generator backward needs a training-mode pass");
            let d = dropout_backward(cache.mask.as_ref(), &dh);
            let d = layer.bn.backward(bn_cache, &d, &mut grad.g_shared[i].bn);
            let d = relu_backward(&cache.pre, &d);
            dh = layer.dense.backward(&cache.input, &d, &mut grad.g_shared[i].dense);
        }
        let (d_embed, _) = multiply_backward(&pass.embed, &pass.z, &dh);
        self.g_embed.backward(&pass.y, &d_embed, &mut grad.g_embed);
    }

    /// Folds the batch statistics of a training pass into the running averages.
    pub fn update_running_stats(&mut self, pass: &GenPass<T>) {
        for (layer, cache) in self.g_shared.iter_mut().zip(&pass.layers) {
            if let Some(c) = &cache.bn {
                layer.bn.update_running(c);
            }
        }
    }

    /// Discriminator `head` (0 or 1) on a batch `[batch, rows * width]`.
    pub fn discriminator_forward(&self, head: usize, x: &Tensor<T>, y: &[usize]) -> Result<DiscPass<T>> {
        self.check_segments(y)?;
        let (r, w) = (self.config.rows, self.config.width);
        if x.shape() != [y.len(), r * w] {
            return Err(Error::Contract(format!(
                "discriminator input {:?} does not match [{}, {}]",
                x.shape(),
                y.len(),
                r * w
            )));
        }
        let mask = self.d_embed[head].forward(y);
        let masked = multiply(&mask, x).reshape(&[y.len(), r, w]);
        let mut h = avgpool2d(&masked, self.pool()).flatten();
        let mut trunk_in = Vec::with_capacity(self.d_shared.len());
        let mut trunk_pre = Vec::with_capacity(self.d_shared.len());
        for dense in &self.d_shared {
            let pre = dense.forward(&h);
            let next = relu(&pre);
            trunk_in.push(h);
            trunk_pre.push(pre);
            h = next;
        }
        let logits = self.d_heads[head].forward(&h);
        Ok(DiscPass {
            head,
            y: y.to_vec(),
            mask,
            input: x.clone(),
            trunk_in,
            trunk_pre,
            trunk_out: h,
            logits,
        })
    }

    /// Accumulates discriminator gradients and returns the gradient with
    /// respect to the discriminator input.
    pub fn discriminator_backward(&self, pass: &DiscPass<T>, d_logits: &Tensor<T>, grad: &mut CoupledGan<T>) -> Tensor<T> {
        let k = pass.head;
        let (b, r, w) = (pass.y.len(), self.config.rows, self.config.width);
        let mut dh = self.d_heads[k].backward(&pass.trunk_out, d_logits, &mut grad.d_heads[k]);
        for (i, dense) in self.d_shared.iter().enumerate().rev() {
            let d = relu_backward(&pass.trunk_pre[i], &dh);
            dh = dense.backward(&pass.trunk_in[i], &d, &mut grad.d_shared[i]);
        }
        let (ph, pw) = self.config.pooled_dims();
        let d_masked = avgpool2d_backward(&[b, r, w], &dh.reshape(&[b, ph, pw]), self.pool()).reshape(&[b, r * w]);
        let (d_mask, dx) = multiply_backward(&pass.mask, &pass.input, &d_masked);
        self.d_embed[k].backward(&pass.y, &d_mask, &mut grad.d_embed[k]);
        dx
    }

    /// Discriminator objective: the mean over both heads of the average of
    /// the real-batch loss (target `label_smooth`) and the fake-batch loss
    /// (target 0). Gradients are accumulated into `grad` when given.
    pub fn discriminator_objective(
        &self,
        real: [&Tensor<T>; 2],
        fake: [&Tensor<T>; 2],
        y: &[usize],
        label_smooth: f64,
        mut grad: Option<&mut CoupledGan<T>>,
    ) -> Result<DiscEval> {
        let quarter = T::of(0.25);
        let mut loss = 0.0;
        let mut accuracy = [0.0; 2];
        for k in 0..2 {
            let rp = self.discriminator_forward(k, real[k], y)?;
            let fp = self.discriminator_forward(k, fake[k], y)?;
            let (lr, gr) = sigmoid_xent_mean(&rp.logits, T::of(label_smooth));
            let (lf, gf) = sigmoid_xent_mean(&fp.logits, T::zero());
            loss += 0.25 * (lr.to_f64().unwrap() + lf.to_f64().unwrap());
            let hits = rp.logits.data().iter().filter(|&&z| z > T::zero()).count()
                + fp.logits.data().iter().filter(|&&z| z <= T::zero()).count();
            accuracy[k] = hits as f64 / (2 * y.len()) as f64;
            if let Some(g) = grad.as_deref_mut() {
                self.discriminator_backward(&rp, &gr.map(|v| v * quarter), g);
                self.discriminator_backward(&fp, &gf.map(|v| v * quarter), g);
            }
        }
        Ok(DiscEval { loss, accuracy })
    }

    /// Generator objective: mean over both heads of the loss of the generated
    /// batches against target 1 through the current discriminators. With
    /// `grad`, gradients flow into both generator and discriminator blocks;
    /// the caller decides which ones to apply.
    pub fn generator_objective(&self, pass: &GenPass<T>, grad: Option<&mut CoupledGan<T>>) -> Result<f64> {
        let half = T::of(0.5);
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(2);
        let mut passes = Vec::with_capacity(2);
        for k in 0..2 {
            let dp = self.discriminator_forward(k, &pass.outputs[k], &pass.y)?;
            let (l, g) = sigmoid_xent_mean(&dp.logits, T::one());
            loss += 0.5 * l.to_f64().unwrap();
            d_out.push(g.map(|v| v * half));
            passes.push(dp);
        }
        if let Some(grad) = grad {
            let dx: Vec<Tensor<T>> = passes
                .iter()
                .zip(&d_out)
                .map(|(p, d)| self.discriminator_backward(p, d, grad))
                .collect();
            self.generator_backward(pass, [&dx[0], &dx[1]], grad);
        }
        Ok(loss)
    }
}

impl CoupledGan<f32> {
    /// Inference-mode sample for one latent vector and segment, returning the
    /// two `[rows, width]` matrices with entries in (-1, 1).
    pub fn generate(&self, z: &[f32], segment: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let zt = Tensor::from_vec(&[1, z.len()], z.to_vec());
        let [a, b] = self.generate_batch(&zt, &[segment])?;
        let shape = [self.config.rows, self.config.width];
        Ok((a.reshape(&shape), b.reshape(&shape)))
    }

    /// Inference-mode samples for a latent batch; outputs are `[batch, rows * width]`.
    pub fn generate_batch(&self, z: &Tensor<f32>, y: &[usize]) -> Result<[Tensor<f32>; 2]> {
        // Inference draws no dropout masks, so the generator is never consulted.
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        Ok(self.generator_forward(z, y, Mode::Infer, &mut unused)?.outputs)
    }
}

impl<T: Scalar> Params<T> for CoupledGan<T> {
    fn blocks(&self) -> Vec<Block<'_, T>> {
        let mut v: Vec<Block<'_, T>> = prefixed("g_embed", self.g_embed.blocks());
        for (i, l) in self.g_shared.iter().enumerate() {
            v.extend(prefixed(&format!("g_shared.{i}.dense"), l.dense.blocks()));
            v.extend(prefixed(&format!("g_shared.{i}.bn"), l.bn.blocks()));
        }
        for (k, h) in self.g_heads.iter().enumerate() {
            v.extend(prefixed(&format!("g_head_{}", k + 1), h.blocks()));
        }
        for (k, e) in self.d_embed.iter().enumerate() {
            v.extend(prefixed(&format!("d_embed_{}", k + 1), e.blocks()));
        }
        for (i, d) in self.d_shared.iter().enumerate() {
            v.extend(prefixed(&format!("d_shared.{i}"), d.blocks()));
        }
        for (k, h) in self.d_heads.iter().enumerate() {
            v.extend(prefixed(&format!("d_head_{}", k + 1), h.blocks()));
        }
        v
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut v: Vec<(String, &mut Tensor<T>)> = prefixed_mut("g_embed", self.g_embed.blocks_mut());
        for (i, l) in self.g_shared.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("g_shared.{i}.dense"), l.dense.blocks_mut()));
            v.extend(prefixed_mut(&format!("g_shared.{i}.bn"), l.bn.blocks_mut()));
        }
        for (k, h) in self.g_heads.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("g_head_{}", k + 1), h.blocks_mut()));
        }
        for (k, e) in self.d_embed.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("d_embed_{}", k + 1), e.blocks_mut()));
        }
        for (i, d) in self.d_shared.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("d_shared.{i}"), d.blocks_mut()));
        }
        for (k, h) in self.d_heads.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("d_head_{}", k + 1), h.blocks_mut()));
        }
        v
    }
}

/// Builds a randomly initialized single-precision model.
pub fn build_model(cfg: &GanConfig) -> Result<CoupledGan<f32>> {
    CoupledGan::new(cfg)
}
