/// Adaptive Krichevsky–Trofimov style bit model with a configurable prior count
/// `a = num / den` (the classic estimator is `a = 1/2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KtModel {
    num: u64,
    den: u64,
    zeros: u64,
    ones: u64,
}

const PROB_SCALE: u64 = 1 << 16;

impl KtModel {
    pub fn new(num: u32, den: u32) -> Self {
        assert!(num > 0 && den > 0, "prior strength must be positive");
        KtModel {
            num: num as u64,
            den: den as u64,
            zeros: 0,
            ones: 0,
        }
    }

    /// P(next symbol = 0) scaled to 16 bits, rounded half up, clamped to [1, 2^16 - 1].
    pub fn p0(&self) -> u64 {
        let zeros = self.zeros as u128 * self.den as u128 + self.num as u128;
        let total = (self.zeros + self.ones) as u128 * self.den as u128 + 2 * self.num as u128;
        let p = (2 * zeros * PROB_SCALE as u128 + total) / (2 * total);
        (p as u64).clamp(1, PROB_SCALE - 1)
    }

    pub fn update(&mut self, symbol: u8) {
        if symbol == 0 {
            self.zeros += 1;
        } else {
            self.ones += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_start_and_adaptation() {
        let mut m = KtModel::new(1, 2);
        assert_eq!(m.p0(), 32768);
        m.update(0);
        assert_eq!(m.p0(), 49152);
        m.update(1);
        assert_eq!(m.p0(), 32768);
    }

    #[test]
    fn clamped_at_extremes() {
        let mut m = KtModel::new(1, 2);
        for _ in 0..200_000 {
            m.update(0);
        }
        assert_eq!(m.p0(), PROB_SCALE - 1);
    }
}
