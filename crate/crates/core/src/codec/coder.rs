//! Binary arithmetic coder over a 48-bit range window.
//!
//! The coder keeps `range` in `[2^32, 2^48]` and splits it with a 16-bit
//! probability, emitting one bit per doubling. A carry out of the window is
//! propagated back into the bits already emitted. Termination emits the
//! shortest binary fraction inside the final interval, so a payload followed
//! by any number of zero bits decodes to the same symbols.

use super::model::KtModel;

const RANGE_BITS: u32 = 48;
const TOP: u64 = 1 << RANGE_BITS;
const MASK: u64 = TOP - 1;
const BOT: u64 = 1 << 32;

#[derive(Debug)]
struct Encoder {
    bits: Vec<u8>,
    low: u64,
    range: u64,
}

impl Encoder {
    fn new() -> Self {
        Encoder {
            bits: Vec::new(),
            low: 0,
            range: TOP,
        }
    }

    fn carry(&mut self) {
        // The full interval lies in [0, 1), so some emitted bit is 0.
        let last_zero = self
            .bits
            .iter()
            .rposition(|&b| b == 0)
            .expect("carry out of the unit interval");
        self.bits[last_zero] = 1;
        for b in &mut self.bits[last_zero + 1..] {
            *b = 0;
        }
    }

    fn encode(&mut self, symbol: u8, p0: u64) {
        let bound = (self.range >> 16) * p0;
        if symbol == 0 {
            self.range = bound;
        } else {
            self.low += bound;
            self.range -= bound;
        }
        if self.low >= TOP {
            self.carry();
            self.low -= TOP;
        }
        while self.range < BOT {
            self.bits.push(((self.low >> (RANGE_BITS - 1)) & 1) as u8);
            self.low = (self.low << 1) & MASK;
            self.range <<= 1;
        }
    }

    /// Emitted prefix followed by the 48 window bits of `v` (`v < 2^49`, with
    /// bit 48 carried into the prefix).
    fn spell(&self, v: i128) -> Vec<u8> {
        let mut prefix = self.bits.clone();
        let mut v = v;
        if v < 0 {
            // borrow from the prefix
            let last_one = prefix.iter().rposition(|&b| b == 1).expect("borrow below zero");
            prefix[last_one] = 0;
            for b in &mut prefix[last_one + 1..] {
                *b = 1;
            }
            v += TOP as i128;
        } else if v >= TOP as i128 {
            let last_zero = prefix.iter().rposition(|&b| b == 0).expect("carry above one");
            prefix[last_zero] = 1;
            for b in &mut prefix[last_zero + 1..] {
                *b = 0;
            }
            v -= TOP as i128;
        }
        let v = v as u64;
        prefix.extend((0..RANGE_BITS).rev().map(|k| ((v >> k) & 1) as u8));
        prefix
    }

    fn finish(self) -> Vec<u8> {
        if self.low == 0 && self.bits.iter().all(|&b| b == 0) {
            return Vec::new();
        }
        let lo = self.spell(self.low as i128 - 1);
        let hi = self.spell(self.low as i128 + self.range as i128 - 1);
        let cut = lo
            .iter()
            .zip(&hi)
            .position(|(a, b)| a != b)
            .expect("degenerate final interval");
        let mut out = hi;
        out.truncate(cut + 1);
        out
    }
}

/// Arithmetic code of a binary sequence (no framing). An all-zero sequence
/// yields an empty payload.
pub fn encode_symbols(symbols: &[u8], model: KtModel) -> Vec<u8> {
    let mut enc = Encoder::new();
    let mut model = model;
    for &s in symbols {
        let s = (s != 0) as u8;
        enc.encode(s, model.p0());
        model.update(s);
    }
    enc.finish()
}

/// Decodes `n` symbols from `payload`; missing bits read as zero. Total over all
/// inputs.
pub fn decode_symbols(payload: &[u8], n: usize, model: KtModel) -> Vec<u8> {
    let mut model = model;
    let mut next = payload.iter().map(|&b| (b != 0) as u64).chain(std::iter::repeat(0));
    let mut code: u64 = 0;
    for _ in 0..RANGE_BITS {
        code = (code << 1) | next.next().unwrap();
    }
    let mut range = TOP;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let bound = (range >> 16) * model.p0();
        let s = if code < bound {
            range = bound;
            0
        } else {
            code -= bound;
            range -= bound;
            1
        };
        model.update(s);
        out.push(s);
        while range < BOT {
            range <<= 1;
            code = (code << 1) | next.next().unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::codec::{reference_decode, reference_encode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kt() -> KtModel {
        KtModel::new(1, 2)
    }

    #[test]
    fn fixed_row_matches_frozen_reference_bits() {
        let row = [1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0];
        let frozen: Vec<u8> = FROZEN_PAYLOAD.iter().map(|&c| (c - b'0') as u8).collect();
        assert_eq!(reference_encode(&row, 1, 2), frozen);
        assert_eq!(encode_symbols(&row, kt()), frozen);
    }

    // Payload of [1,0,1,0,0,0,0,0,1,0,0,0] under add-1/2, computed with the
    // reference interval coder.
    const FROZEN_PAYLOAD: &[u8] = b"10010000101";

    #[test]
    fn matches_reference_on_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(0..400);
            let density: f64 = rng.random_range(0.0..0.3);
            let row: Vec<u8> = (0..n).map(|_| rng.random_bool(density) as u8).collect();
            let code = encode_symbols(&row, kt());
            assert_eq!(code, reference_encode(&row, 1, 2));
            assert_eq!(decode_symbols(&code, n, kt()), row);
        }
    }

    #[test]
    fn decoder_matches_reference_on_random_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let bits: Vec<u8> = (0..32).map(|_| rng.random_range(0..2)).collect();
            assert_eq!(
                decode_symbols(&bits, 10, kt()),
                reference_decode(&bits, 10, 1, 2)
            );
        }
    }

    #[test]
    fn trailing_zeros_do_not_change_decoding() {
        let row = [0, 0, 1, 1, 0, 1, 0, 0, 0, 0, 1];
        let mut code = encode_symbols(&row, kt());
        for _ in 0..70 {
            code.push(0);
            assert_eq!(decode_symbols(&code, row.len(), kt()), row);
        }
    }

    #[test]
    fn carry_heavy_rows_round_trip() {
        // Long runs of ones push `low` against the top of the window.
        for n in [1usize, 2, 3, 17, 64, 300] {
            let row = vec![1u8; n];
            let code = encode_symbols(&row, kt());
            assert_eq!(code, reference_encode(&row, 1, 2));
            assert_eq!(decode_symbols(&code, n, kt()), row);
        }
    }
}
