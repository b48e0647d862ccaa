//! Finite-difference gradient checks in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    avgpool2d, avgpool2d_backward, dropout, dropout_backward, multiply, multiply_backward, relu, relu_backward,
    tanh, tanh_backward, BatchNorm, Dense, Embedding, Mode, Pool2d,
};
use super::loss::sigmoid_xent_mean;
use super::params::{Params, TensorSet};
use super::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-6;
/// Denominator floor for the relative error, so that near-zero gradient
/// entries are compared on an absolute scale.
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_block: usize,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `grads` against central differences of `loss` around `params`.
/// `grads` must list its trainable blocks in the same order as `params`.
pub fn check_gradients<P, F>(params: &P, grads: &P, mut loss: F, h: f64, floor: f64) -> GradReport
where
    P: Params<f64> + Clone,
    F: FnMut(&P) -> f64,
{
    let analytic: Vec<Vec<f64>> = grads.trainable().iter().map(|t| t.data().to_vec()).collect();
    let mut probe = params.clone();
    let mut report = GradReport {
        max_rel_error: 0.0,
        worst_block: 0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (b, block) in analytic.iter().enumerate() {
        for (i, &a) in block.iter().enumerate() {
            let orig = probe.trainable()[b].data()[i];
            probe.trainable_mut()[b].data_mut()[i] = orig + h;
            let up = loss(&probe);
            probe.trainable_mut()[b].data_mut()[i] = orig - h;
            let down = loss(&probe);
            probe.trainable_mut()[b].data_mut()[i] = orig;
            let n = (up - down) / (2.0 * h);
            let e = relative_error(a, n, floor);
            report.checked += 1;
            if e > report.max_rel_error || e.is_nan() {
                report = GradReport {
                    max_rel_error: e,
                    worst_block: b,
                    worst_index: i,
                    analytic: a,
                    numeric: n,
                    checked: report.checked,
                };
            }
        }
    }
    report
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Weighted sum of outputs, so every output gets a distinct upstream gradient.
fn probe_loss(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn input_check<F>(x: &Tensor<f64>, dx: Tensor<f64>, f: F) -> GradReport
where
    F: Fn(&Tensor<f64>) -> f64,
{
    let xs = TensorSet::new(vec![("x", x.clone())]);
    let gs = TensorSet::new(vec![("x", dx)]);
    check_gradients(&xs, &gs, |s| f(s.get(0)), DEFAULT_STEP, DEFAULT_FLOOR)
}

/// Central-difference checks of every layer's backward pass, parameters and
/// inputs, at random points drawn from `seed`.
pub fn layer_suite(seed: u64) -> Vec<(&'static str, GradReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let dense = Dense::<f64>::glorot(5, 4, &mut rng);
    let x = random(&[3, 5], &mut rng);
    let w = random(&[3, 4], &mut rng);
    let mut grad = Dense::zeros(5, 4);
    let dx = dense.backward(&x, &w, &mut grad);
    out.push((
        "dense params",
        check_gradients(&dense, &grad, |l| probe_loss(&l.forward(&x), &w), DEFAULT_STEP, DEFAULT_FLOOR),
    ));
    out.push(("dense input", input_check(&x, dx, |x| probe_loss(&dense.forward(x), &w))));

    let mut bn = BatchNorm::<f64>::new(3);
    bn.gamma = random(&[3], &mut rng);
    bn.beta = random(&[3], &mut rng);
    let x = random(&[6, 3], &mut rng);
    let w = random(&[6, 3], &mut rng);
    let (_, cache) = bn.forward_train(&x);
    let mut grad = BatchNorm::new(3);
    grad.gamma = Tensor::zeros(&[3]);
    let dx = bn.backward(&cache, &w, &mut grad);
    out.push((
        "batchnorm params",
        check_gradients(&bn, &grad, |l| probe_loss(&l.forward_train(&x).0, &w), DEFAULT_STEP, DEFAULT_FLOOR),
    ));
    out.push(("batchnorm input", input_check(&x, dx, |x| probe_loss(&bn.forward_train(x).0, &w))));

    // Keep inputs off the kink at zero.
    let x = random(&[2, 5], &mut rng).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let w = random(&[2, 5], &mut rng);
    out.push(("relu", input_check(&x, relu_backward(&x, &w), |x| probe_loss(&relu(x), &w))));
    let y = tanh(&x);
    out.push(("tanh", input_check(&x, tanh_backward(&y, &w), |x| probe_loss(&tanh(x), &w))));

    let a = random(&[2, 5], &mut rng);
    let (da, _) = multiply_backward(&a, &x, &w);
    out.push(("multiply", input_check(&a, da, |a| probe_loss(&multiply(a, &x), &w))));

    let (_, mask) = dropout(&x, 0.25, &mut rng, Mode::Train);
    let dx = dropout_backward(mask.as_ref(), &w);
    let apply = |x: &Tensor<f64>| mask.as_ref().map_or_else(|| x.clone(), |m| multiply(x, m));
    out.push(("dropout", input_check(&x, dx, |x| probe_loss(&apply(x), &w))));

    let emb = Embedding::<f64>::uniform(4, 3, &mut rng);
    let idx = [2, 0, 2];
    let w = random(&[3, 3], &mut rng);
    let mut grad = Embedding::zeros(4, 3);
    emb.backward(&idx, &w, &mut grad);
    out.push((
        "embedding",
        check_gradients(&emb, &grad, |e| probe_loss(&e.forward(&idx), &w), DEFAULT_STEP, DEFAULT_FLOOR),
    ));

    let pool = Pool2d {
        window: (2, 2),
        stride: (2, 2),
    };
    let x = random(&[2, 5, 6], &mut rng);
    let w = random(&[2, 2, 3], &mut rng);
    let dx = avgpool2d_backward(x.shape(), &w, pool);
    out.push(("avgpool", input_check(&x, dx, |x| probe_loss(&avgpool2d(x, pool), &w))));

    let z = random(&[5, 1], &mut rng).map(|v| 3.0 * v);
    let (_, g) = sigmoid_xent_mean(&z, 0.9);
    out.push(("sigmoid cross-entropy", input_check(&z, g, |z| sigmoid_xent_mean(z, 0.9).0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::sigmoid_xent;

    #[test]
    fn layer_suite_passes() {
        for seed in 0..5 {
            for (name, rep) in layer_suite(seed) {
                assert!(rep.max_rel_error < 1e-4, "{name}: {rep:?}");
            }
        }
    }

    #[test]
    fn dense_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = Dense::<f64>::glorot(5, 4, &mut rng);
        let x = random(&[3, 5], &mut rng);
        let w = random(&[3, 4], &mut rng);
        let mut grad = Dense::zeros(5, 4);
        let dx = layer.backward(&x, &w, &mut grad);
        let rep = check_gradients(&layer, &grad, |l| probe_loss(&l.forward(&x), &w), DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
        let xs = TensorSet::new(vec![("x", x.clone())]);
        let gs = TensorSet::new(vec![("x", dx)]);
        let rep = check_gradients(&xs, &gs, |s| probe_loss(&layer.forward(s.get(0)), &w), DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
    }

    #[test]
    fn batchnorm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut bn = BatchNorm::<f64>::new(3);
        bn.gamma = random(&[3], &mut rng);
        bn.beta = random(&[3], &mut rng);
        let x = random(&[6, 3], &mut rng);
        let w = random(&[6, 3], &mut rng);
        let (_, cache) = bn.forward_train(&x);
        let mut grad = BatchNorm::new(3);
        grad.gamma = Tensor::zeros(&[3]);
        let dx = bn.backward(&cache, &w, &mut grad);
        let rep = check_gradients(&bn, &grad, |l| probe_loss(&l.forward_train(&x).0, &w), DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-5, "{rep:?}");
        let xs = TensorSet::new(vec![("x", x.clone())]);
        let gs = TensorSet::new(vec![("x", dx)]);
        let rep = check_gradients(&xs, &gs, |s| probe_loss(&bn.forward_train(s.get(0)).0, &w), DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-5, "{rep:?}");
    }

    #[test]
    fn relu_gradients_away_from_kink() {
        let x = Tensor::from_vec(&[1, 4], vec![-0.7, 0.3, 1.2, -0.05]);
        let w = Tensor::from_vec(&[1, 4], vec![0.5, -1.0, 2.0, 1.5]);
        let dx = relu_backward(&x, &w);
        let xs = TensorSet::new(vec![("x", x)]);
        let gs = TensorSet::new(vec![("x", dx)]);
        let rep = check_gradients(&xs, &gs, |s| probe_loss(&relu(s.get(0)), &w), DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-7, "{rep:?}");
    }

    #[test]
    fn xent_gradients() {
        for &label in &[0.0, 0.9, 1.0] {
            for &z in &[-4.0, -0.3, 0.0, 0.8, 5.0] {
                let (_, g) = sigmoid_xent(z, label);
                let n = (sigmoid_xent(z + 1e-6, label).0 - sigmoid_xent(z - 1e-6, label).0) / 2e-6;
                assert!(relative_error(g, n, DEFAULT_FLOOR) < 1e-7, "z={z} t={label}");
            }
        }
        let z = Tensor::from_vec(&[4, 1], vec![-2.0, 0.1, 0.7, 3.0]);
        let (_, g) = sigmoid_xent_mean(&z, 0.9);
        let xs = TensorSet::new(vec![("z", z)]);
        let gs = TensorSet::new(vec![("z", g)]);
        let rep = check_gradients(&xs, &gs, |s| sigmoid_xent_mean(s.get(0), 0.9).0, DEFAULT_STEP, DEFAULT_FLOOR);
        assert!(rep.max_rel_error < 1e-7, "{rep:?}");
    }
}
