//! Interval-subdivision reference for the row codec.
//!
//! Tracks the absolute coding interval as an unbounded integer pair, so there
//! is no output window, carry handling or pending-bit machinery. The split rule
//! (48-bit range, 16-bit quantized add-a probabilities, renormalize while the
//! range is below 2^32) is the codec's definition and is restated here from
//! scratch.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

const RANGE_BITS: u32 = 48;
const RENORM_BELOW: u64 = 1 << 32;
const PROB_SCALE: i64 = 1 << 16;

fn quantized_p0(c0: u64, c1: u64, prior_num: u32, prior_den: u32) -> u64 {
    let a = BigRational::new(BigInt::from(prior_num), BigInt::from(prior_den));
    let p0 = (BigRational::from_integer(BigInt::from(c0)) + &a)
        / (BigRational::from_integer(BigInt::from(c0 + c1)) + &a + &a);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let scaled = p0 * BigRational::from_integer(BigInt::from(PROB_SCALE)) + half;
    let f0 = scaled.floor().to_integer().to_i64().unwrap();
    f0.clamp(1, PROB_SCALE - 1) as u64
}

fn bits_of(v: &BigUint, width: u64) -> Vec<u8> {
    (0..width)
        .rev()
        .map(|k| if v.bit(k) { 1 } else { 0 })
        .collect()
}

/// Payload bits (no framing) of `symbols` under the adaptive add-a model.
pub fn reference_encode(symbols: &[u8], prior_num: u32, prior_den: u32) -> Vec<u8> {
    let mut low = BigUint::zero();
    let mut range: u64 = 1 << RANGE_BITS;
    let mut scale: u64 = 0;
    let (mut c0, mut c1) = (0u64, 0u64);
    for &s in symbols {
        let f0 = quantized_p0(c0, c1, prior_num, prior_den);
        let bound = (range >> 16) * f0;
        if s == 0 {
            range = bound;
            c0 += 1;
        } else {
            low += bound;
            range -= bound;
            c1 += 1;
        }
        while range < RENORM_BELOW {
            range <<= 1;
            low <<= 1u32;
            scale += 1;
        }
    }
    if low.is_zero() {
        return Vec::new();
    }
    // Shortest binary fraction in [low, low + range): cut (low + range - 1)
    // just after the first bit where it departs from (low - 1).
    let width = RANGE_BITS as u64 + scale;
    let lo = bits_of(&(&low - 1u32), width);
    let hi = bits_of(&(&low + range - 1u32), width);
    let cut = lo.iter().zip(&hi).position(|(a, b)| a != b).unwrap();
    hi[..=cut].to_vec()
}

/// Decodes `n` symbols from payload bits, reading past the end as zeros.
pub fn reference_decode(payload: &[u8], n: usize, prior_num: u32, prior_den: u32) -> Vec<u8> {
    let mut value = BigUint::zero();
    for &b in payload {
        value <<= 1u32;
        if b != 0 {
            value += 1u32;
        }
    }
    let len = payload.len() as u64;
    let mut low = BigUint::zero();
    let mut range: u64 = 1 << RANGE_BITS;
    let mut scale: u64 = 0;
    let (mut c0, mut c1) = (0u64, 0u64);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let width = RANGE_BITS as u64 + scale;
        let x = if width >= len {
            &value << (width - len)
        } else {
            &value >> (len - width)
        };
        let f0 = quantized_p0(c0, c1, prior_num, prior_den);
        let bound = (range >> 16) * f0;
        if x < &low + bound {
            out.push(0);
            range = bound;
            c0 += 1;
        } else {
            out.push(1);
            low += bound;
            range -= bound;
            c1 += 1;
        }
        while range < RENORM_BELOW {
            range <<= 1;
            low <<= 1u32;
            scale += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_probabilities() {
        assert_eq!(quantized_p0(0, 0, 1, 2), 32768);
        // (1 + 1/2) / (1 + 1) = 3/4
        assert_eq!(quantized_p0(1, 0, 1, 2), 49152);
        assert_eq!(quantized_p0(1_000_000, 0, 1, 2), 65535);
        assert_eq!(quantized_p0(0, 1_000_000, 1, 2), 1);
    }

    #[test]
    fn zero_row_has_empty_payload() {
        assert!(reference_encode(&[0; 9], 1, 2).is_empty());
        assert_eq!(reference_decode(&[], 9, 1, 2), vec![0; 9]);
    }

    #[test]
    fn self_round_trip() {
        let row = [1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0];
        let code = reference_encode(&row, 1, 2);
        assert_eq!(reference_decode(&code, row.len(), 1, 2), row);
    }
}
