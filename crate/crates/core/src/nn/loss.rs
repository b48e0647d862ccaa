use super::tensor::{Scalar, Tensor};

/// Cross-entropy of `sigmoid(logit)` against a (possibly smoothed) label,
/// `max(z, 0) - z t + ln(1 + e^-|z|)`, and its derivative `sigmoid(z) - t`.
pub fn sigmoid_xent<T: Scalar>(logit: T, label: T) -> (T, T) {
    let zero = T::zero();
    let one = T::one();
    let loss = logit.max(zero) - logit * label + (one + (-logit.abs()).exp()).ln();
    let sig = if logit >= zero {
        one / (one + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (one + e)
    };
    (loss, sig - label)
}

/// Mean [`sigmoid_xent`] over a `[batch, 1]` logit column with a shared label.
pub fn sigmoid_xent_mean<T: Scalar>(logits: &Tensor<T>, label: T) -> (T, Tensor<T>) {
    let n = T::of(logits.len() as f64);
    let mut total = T::zero();
    let grads = logits
        .data()
        .iter()
        .map(|&z| {
            let (l, g) = sigmoid_xent(z, label);
            total += l;
            g / n
        })
        .collect();
    (total / n, Tensor::from_vec(logits.shape(), grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point() {
        let (l, g) = sigmoid_xent(0.0f64, 0.5);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn saturation_is_stable() {
        let (l, g) = sigmoid_xent(800.0f64, 1.0);
        assert!(l.abs() < 1e-300 && g.abs() < 1e-300);
        let (l, _) = sigmoid_xent(-800.0f64, 0.0);
        assert_eq!(l, 0.0);
        let (l, g) = sigmoid_xent(-800.0f64, 1.0);
        assert!((l - 800.0).abs() < 1e-9 && (g + 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_formula() {
        for &(z, t) in &[(0.3f64, 1.0), (-1.7, 0.0), (2.2, 0.9)] {
            let p = 1.0 / (1.0 + (-z).exp());
            let naive = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
            assert!((sigmoid_xent(z, t).0 - naive).abs() < 1e-12);
        }
    }
}
