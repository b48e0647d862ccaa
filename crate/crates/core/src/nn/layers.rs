//! Layer kernels with hand-written backward passes. Batches are `[batch, ...]`.

use rand::Rng;

use super::params::{Block, Params};
use super::tensor::{matmul, matmul_nt, matmul_tn, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Fully connected layer, `y = x W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| T::of(rng.random_range(-limit..limit)))
            .collect();
        Dense {
            weight: Tensor::from_vec(&[inputs, outputs], data),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (b, k, n) = (x.rows(), self.inputs(), self.outputs());
        assert_eq!(x.row_len(), k, "dense expects {k} inputs, got {}", x.row_len());
        let mut y = matmul(x.data(), self.weight.data(), b, k, n);
        for row in y.chunks_mut(n) {
            for (v, &bias) in row.iter_mut().zip(self.bias.data()) {
                *v += bias;
            }
        }
        Tensor::from_vec(&[b, n], y)
    }

    /// Returns `dx` and accumulates `dW`, `db` into `grad`.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grad: &mut Dense<T>) -> Tensor<T> {
        let (b, k, n) = (x.rows(), self.inputs(), self.outputs());
        assert_eq!(dy.shape(), &[b, n]);
        let dw = matmul_tn(x.data(), dy.data(), b, k, n);
        for (g, v) in grad.weight.data_mut().iter_mut().zip(dw) {
            *g += v;
        }
        for row in dy.data().chunks(n) {
            for (g, &v) in grad.bias.data_mut().iter_mut().zip(row) {
                *g += v;
            }
        }
        Tensor::from_vec(&[b, k], matmul_nt(dy.data(), self.weight.data(), b, n, k))
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

impl<T: Scalar> Params<T> for Dense<T> {
    fn blocks(&self) -> Vec<Block<'_, T>> {
        vec![
            Block::trainable("kernel", &self.weight),
            Block::trainable("bias", &self.bias),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        vec![("kernel".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.tanh())
}

/// Backward of tanh given its output `y`.
pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| g * (T::one() - v * v))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

pub fn multiply<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!(a.len(), b.len(), "multiply needs equal element counts");
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Gradients of `a ⊙ b` with respect to `a` and `b`.
pub fn multiply_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    (multiply(dy, b).reshape(a.shape()), multiply(dy, a).reshape(b.shape()))
}

/// Batch normalization over the feature axis of `[batch, features]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
}

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Tensor::filled(&[features], T::one()),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], T::one()),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    fn apply(&self, x: &Tensor<T>, mean: &[T], inv_std: &[T]) -> (Tensor<T>, Tensor<T>) {
        let f = self.features();
        assert_eq!(x.row_len(), f);
        let mut normalized = x.clone();
        for row in normalized.data_mut().chunks_mut(f) {
            for j in 0..f {
                row[j] = (row[j] - mean[j]) * inv_std[j];
            }
        }
        let mut y = normalized.clone();
        for row in y.data_mut().chunks_mut(f) {
            for j in 0..f {
                row[j] = row[j] * self.gamma.data()[j] + self.beta.data()[j];
            }
        }
        (y, normalized)
    }

    /// Normalizes with the batch statistics. Running statistics are left alone;
    /// see [`BatchNorm::update_running`].
    pub fn forward_train(&self, x: &Tensor<T>) -> (Tensor<T>, BatchNormCache<T>) {
        let f = self.features();
        let b = T::of(x.rows() as f64);
        let mut mean = vec![T::zero(); f];
        for row in x.data().chunks(f) {
            for j in 0..f {
                mean[j] += row[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= b);
        let mut var = vec![T::zero(); f];
        for row in x.data().chunks(f) {
            for j in 0..f {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= b);
        let eps = T::of(self.eps);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (y, normalized) = self.apply(x, &mean, &inv_std);
        (
            y,
            BatchNormCache {
                normalized,
                inv_std,
                mean,
                var,
            },
        )
    }

    pub fn forward_infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let eps = T::of(self.eps);
        let inv_std: Vec<T> = self
            .running_var
            .data()
            .iter()
            .map(|&v| T::one() / (v + eps).sqrt())
            .collect();
        self.apply(x, self.running_mean.data(), &inv_std).0
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> (Tensor<T>, Option<BatchNormCache<T>>) {
        match mode {
            Mode::Train => {
                let (y, c) = self.forward_train(x);
                (y, Some(c))
            }
            Mode::Infer => (self.forward_infer(x), None),
        }
    }

    pub fn update_running(&mut self, cache: &BatchNormCache<T>) {
        let m = T::of(self.momentum);
        let one_m = T::one() - m;
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = *r * m + v * one_m;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = *r * m + v * one_m;
        }
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        dy: &Tensor<T>,
        grad: &mut BatchNorm<T>,
    ) -> Tensor<T> {
        let f = self.features();
        let n = dy.rows();
        let bn = T::of(n as f64);
        let xhat = cache.normalized.data();
        let mut sum_dxhat = vec![T::zero(); f];
        let mut sum_dxhat_xhat = vec![T::zero(); f];
        for (i, row) in dy.data().chunks(f).enumerate() {
            for j in 0..f {
                let g = row[j];
                let xh = xhat[i * f + j];
                grad.gamma.data_mut()[j] += g * xh;
                grad.beta.data_mut()[j] += g;
                let dxh = g * self.gamma.data()[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * xh;
            }
        }
        let mut dx = vec![T::zero(); n * f];
        for (i, row) in dy.data().chunks(f).enumerate() {
            for j in 0..f {
                let dxh = row[j] * self.gamma.data()[j];
                let xh = xhat[i * f + j];
                dx[i * f + j] =
                    cache.inv_std[j] / bn * (bn * dxh - sum_dxhat[j] - xh * sum_dxhat_xhat[j]);
            }
        }
        Tensor::from_vec(dy.shape(), dx)
    }
}

impl<T: Scalar> Params<T> for BatchNorm<T> {
    fn blocks(&self) -> Vec<Block<'_, T>> {
        vec![
            Block::trainable("gamma", &self.gamma),
            Block::trainable("beta", &self.beta),
            Block::frozen("moving_mean", &self.running_mean),
            Block::frozen("moving_variance", &self.running_var),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        vec![
            ("gamma".into(), &mut self.gamma),
            ("beta".into(), &mut self.beta),
            ("moving_mean".into(), &mut self.running_mean),
            ("moving_variance".into(), &mut self.running_var),
        ]
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` at train time,
/// so inference is the identity. Returns the output and the applied mask.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> (Tensor<T>, Option<Tensor<T>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == Mode::Infer || rate == 0.0 {
        return (x.clone(), None);
    }
    let scale = T::of(1.0 / (1.0 - rate));
    let mask_data = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale })
        .collect();
    let mask = Tensor::from_vec(x.shape(), mask_data);
    (multiply(x, &mask), Some(mask))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&Tensor<T>>, dy: &Tensor<T>) -> Tensor<T> {
    match mask {
        Some(m) => multiply(dy, m),
        None => dy.clone(),
    }
}

/// Lookup table of `[entries, dim]` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T> {
    pub table: Tensor<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn zeros(entries: usize, dim: usize) -> Self {
        Embedding {
            table: Tensor::zeros(&[entries, dim]),
        }
    }

    /// Uniform(-0.05, 0.05) initialization.
    pub fn uniform<R: Rng + ?Sized>(entries: usize, dim: usize, rng: &mut R) -> Self {
        let data = (0..entries * dim)
            .map(|_| T::of(rng.random_range(-0.05..0.05)))
            .collect();
        Embedding {
            table: Tensor::from_vec(&[entries, dim], data),
        }
    }

    pub fn entries(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.row_len()
    }

    pub fn forward(&self, index: &[usize]) -> Tensor<T> {
        let d = self.dim();
        let mut out = Vec::with_capacity(index.len() * d);
        for &i in index {
            assert!(i < self.entries(), "embedding index {i} out of range");
            out.extend_from_slice(self.table.row(i));
        }
        Tensor::from_vec(&[index.len(), d], out)
    }

    pub fn backward(&self, index: &[usize], dy: &Tensor<T>, grad: &mut Embedding<T>) {
        let d = self.dim();
        for (&i, row) in index.iter().zip(dy.data().chunks(d)) {
            for (g, &v) in grad.table.data_mut()[i * d..(i + 1) * d].iter_mut().zip(row) {
                *g += v;
            }
        }
    }
}

impl<T: Scalar> Params<T> for Embedding<T> {
    fn blocks(&self) -> Vec<Block<'_, T>> {
        vec![Block::trainable("embeddings", &self.table)]
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        vec![("embeddings".into(), &mut self.table)]
    }
}

/// Window and stride of a 2-D average pool (no padding, floor output size).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pool2d {
    pub window: (usize, usize),
    pub stride: (usize, usize),
}

impl Pool2d {
    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        assert!(
            self.window.0 <= h && self.window.1 <= w,
            "pool window {:?} larger than input ({h}, {w})",
            self.window
        );
        assert!(self.stride.0 > 0 && self.stride.1 > 0, "pool stride must be positive");
        (
            (h - self.window.0) / self.stride.0 + 1,
            (w - self.window.1) / self.stride.1 + 1,
        )
    }
}

/// Average pool over `[batch, h, w]`.
pub fn avgpool2d<T: Scalar>(x: &Tensor<T>, pool: Pool2d) -> Tensor<T> {
    let &[b, h, w] = x.shape() else {
        panic!("avgpool2d expects [batch, h, w], got {:?}", x.shape());
    };
    let (oh, ow) = pool.output_dims(h, w);
    let (wh, ww) = pool.window;
    let scale = T::of(1.0 / (wh * ww) as f64);
    let mut out = vec![T::zero(); b * oh * ow];
    for n in 0..b {
        let img = &x.data()[n * h * w..(n + 1) * h * w];
        for i in 0..oh {
            for j in 0..ow {
                let mut s = T::zero();
                for di in 0..wh {
                    let r = (i * pool.stride.0 + di) * w + j * pool.stride.1;
                    for dj in 0..ww {
                        s += img[r + dj];
                    }
                }
                out[(n * oh + i) * ow + j] = s * scale;
            }
        }
    }
    Tensor::from_vec(&[b, oh, ow], out)
}

pub fn avgpool2d_backward<T: Scalar>(input_shape: &[usize], dy: &Tensor<T>, pool: Pool2d) -> Tensor<T> {
    let &[b, h, w] = input_shape else {
        panic!("avgpool2d expects [batch, h, w]");
    };
    let (oh, ow) = pool.output_dims(h, w);
    assert_eq!(dy.shape(), &[b, oh, ow]);
    let (wh, ww) = pool.window;
    let scale = T::of(1.0 / (wh * ww) as f64);
    let mut dx = vec![T::zero(); b * h * w];
    for n in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                let g = dy.data()[(n * oh + i) * ow + j] * scale;
                for di in 0..wh {
                    let r = n * h * w + (i * pool.stride.0 + di) * w + j * pool.stride.1;
                    for dj in 0..ww {
                        dx[r + dj] += g;
                    }
                }
            }
        }
    }
    Tensor::from_vec(input_shape, dx)
}
