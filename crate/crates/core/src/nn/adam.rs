use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are created lazily on the
/// first step and matched to parameters by position.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: Vec<&Tensor<T>>) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lists differ");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed between steps");
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        let one = T::one();
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len());
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (w, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut w = Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5]);
        let before = w.clone();
        let g = Tensor::zeros(&[3]);
        let mut opt = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            opt.step(vec![&mut w], vec![&g]);
        }
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = Tensor::from_vec(&[3], vec![0.0f64, 0.0, 0.0]);
        let g = Tensor::from_vec(&[3], vec![3.0, -0.01, 1e3]);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(vec![&mut w], vec![&g]);
        for (wi, gi) in w.data().iter().zip(g.data()) {
            assert!((wi + 0.001 * gi.signum()).abs() < 1e-6, "{wi}");
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut w = Tensor::from_vec(&[1], vec![1.0f64]);
        let mut opt = Adam::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let g = Tensor::from_vec(&[1], vec![2.0 * w.data()[0]]);
            opt.step(vec![&mut w], vec![&g]);
            let loss = w.data()[0] * w.data()[0];
            assert!(loss.is_finite());
            last = loss;
        }
        assert!(last < 1e-2, "loss {last}");
    }
}
