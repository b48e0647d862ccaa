//! Fixed-width arithmetic coding of category rows.
//!
//! Every category row (one bit per catalog item in that category) is coded
//! into exactly `W` bits: zero padding, a sentinel `1`, then the arithmetic
//! code. The sentinel makes the zero prefix unambiguous, so the same payload
//! decodes identically at any width, and any `W`-bit pattern (such as a
//! binarized generator output) decodes to some row.

mod coder;
mod file;
mod model;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{Catalog, InteractionMatrixPair, SparseBinary};

pub use coder::{decode_symbols, encode_symbols};
pub use file::{read_coded, write_coded, CodedDataset, CodedRecord, RGC_MAGIC};
pub use model::KtModel;

/// Encoded width used for the full-scale catalog.
pub const DEFAULT_WIDTH: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodecConfig {
    pub width: usize,
    /// Prior count `num / den` given to each symbol by the adaptive model.
    pub prior_num: u32,
    pub prior_den: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            width: DEFAULT_WIDTH,
            prior_num: 1,
            prior_den: 2,
        }
    }
}

impl CodecConfig {
    pub fn with_width(width: usize) -> Self {
        CodecConfig {
            width,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::Config(format!(
                "code width must be at least 2, got {}",
                self.width
            )));
        }
        if self.prior_num == 0 || self.prior_den == 0 {
            return Err(Error::Config("prior strength must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> KtModel {
        KtModel::new(self.prior_num, self.prior_den)
    }
}

/// One coded category row, MSB first, exactly `W` bits of 0/1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitRow(Vec<u8>);

impl BitRow {
    pub fn zeros(width: usize) -> Self {
        BitRow(vec![0; width])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Validation("bit rows hold only 0 and 1".into()));
        }
        Ok(BitRow(bits))
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

/// Frames `payload` as zero padding, sentinel, payload.
fn frame(payload: &[u8], width: usize) -> Option<Vec<u8>> {
    let used = payload.len() + 1;
    if used > width {
        return None;
    }
    let mut bits = vec![0u8; width - used];
    bits.push(1);
    bits.extend_from_slice(payload);
    Some(bits)
}

fn encode_row_at(row: &[u8], cfg: &CodecConfig, index: usize) -> Result<Vec<u8>> {
    if row.is_empty() {
        return Ok(vec![0; cfg.width]);
    }
    let payload = encode_symbols(row, cfg.model());
    frame(&payload, cfg.width).ok_or_else(|| {
        let ones = row.iter().filter(|&&b| b != 0).count();
        Error::CodeOverflow {
            row: index,
            needed: payload.len() + 1,
            width: cfg.width,
            len: row.len(),
            ones,
            density: ones as f64 / row.len() as f64,
        }
    })
}

/// Codes one binary row of length `n` into a `W`-bit [`BitRow`]. The all-zero
/// `BitRow` is produced exactly when `n = 0`.
pub fn encode_row(row: &[u8], cfg: &CodecConfig) -> Result<BitRow> {
    encode_row_at(row, cfg, 0).map(BitRow)
}

/// Number of bits (sentinel included) needed to code `row`.
pub fn coded_len(row: &[u8], cfg: &CodecConfig) -> usize {
    if row.is_empty() {
        0
    } else {
        encode_symbols(row, cfg.model()).len() + 1
    }
}

/// Decodes `n` symbols from any bit pattern. Leading zeros are skipped; an
/// all-zero pattern decodes to `n` zeros; otherwise the first `1` is the
/// sentinel and the remainder is the payload.
pub fn decode_row(bits: &[u8], n: usize, cfg: &CodecConfig) -> Vec<u8> {
    match bits.iter().position(|&b| b != 0) {
        None => vec![0; n],
        Some(sentinel) => decode_symbols(&bits[sentinel + 1..], n, cfg.model()),
    }
}

/// An `r x W` coded matrix, rows in catalog category order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedMatrix {
    pub rows: usize,
    pub width: usize,
    /// Fingerprint of the catalog whose category order and sizes the rows follow.
    pub catalog_hash: u64,
    bits: Vec<u8>,
}

impl CodedMatrix {
    pub fn zeros(rows: usize, width: usize, catalog_hash: u64) -> Self {
        CodedMatrix {
            rows,
            width,
            catalog_hash,
            bits: vec![0; rows * width],
        }
    }

    pub fn from_bits(rows: usize, width: usize, catalog_hash: u64, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * width {
            return Err(Error::Validation(format!(
                "coded matrix needs {} bits, got {}",
                rows * width,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Validation("coded matrices hold only 0 and 1".into()));
        }
        Ok(CodedMatrix {
            rows,
            width,
            catalog_hash,
            bits,
        })
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

fn encode_channel(m: &SparseBinary, catalog: &Catalog, cfg: &CodecConfig) -> Result<CodedMatrix> {
    if let Some(&(c, p)) = m.iter().find(|&&(c, p)| c >= catalog.n_categories() || p >= catalog.category_len(c)) {
        return Err(Error::Validation(format!(
            "cell ({c}, {p}) is outside the catalog"
        )));
    }
    let rows: Vec<Vec<u8>> = (0..catalog.n_categories())
        .into_par_iter()
        .map(|c| {
            let dense = InteractionMatrixPair::dense_row(m, c, catalog.category_len(c));
            encode_row_at(&dense, cfg, c)
        })
        .collect::<Result<_>>()?;
    Ok(CodedMatrix {
        rows: catalog.n_categories(),
        width: cfg.width,
        catalog_hash: catalog.fingerprint(),
        bits: rows.concat(),
    })
}

/// Codes both channels of a pair row by row.
pub fn encode_matrix(
    pair: &InteractionMatrixPair,
    catalog: &Catalog,
    cfg: &CodecConfig,
) -> Result<(CodedMatrix, CodedMatrix)> {
    cfg.validate()?;
    Ok((
        encode_channel(&pair.first, catalog, cfg)?,
        encode_channel(&pair.second, catalog, cfg)?,
    ))
}

fn check_shape(coded: &CodedMatrix, lens: &[usize], cfg: &CodecConfig) -> Result<()> {
    if coded.rows != lens.len() || coded.width != cfg.width {
        return Err(Error::Validation(format!(
            "coded matrix is {}x{}, expected {}x{}",
            coded.rows,
            coded.width,
            lens.len(),
            cfg.width
        )));
    }
    Ok(())
}

fn ones_of(row: Vec<u8>) -> Vec<usize> {
    row.into_iter()
        .enumerate()
        .filter_map(|(i, b)| (b == 1).then_some(i))
        .collect()
}

/// Per category, the local item indices decoded to 1. Rows are decoded in
/// parallel.
pub fn decode_matrix(coded: &CodedMatrix, lens: &[usize], cfg: &CodecConfig) -> Result<Vec<Vec<usize>>> {
    check_shape(coded, lens, cfg)?;
    Ok((0..coded.rows)
        .into_par_iter()
        .map(|c| ones_of(decode_row(coded.row(c), lens[c], cfg)))
        .collect())
}

/// Single-threaded [`decode_matrix`].
pub fn decode_matrix_sequential(
    coded: &CodedMatrix,
    lens: &[usize],
    cfg: &CodecConfig,
) -> Result<Vec<Vec<usize>>> {
    check_shape(coded, lens, cfg)?;
    Ok((0..coded.rows)
        .map(|c| ones_of(decode_row(coded.row(c), lens[c], cfg)))
        .collect())
}

/// Decodes a coded pair back to sparse cell sets.
pub fn decode_pair(
    first: &CodedMatrix,
    second: &CodedMatrix,
    catalog: &Catalog,
    cfg: &CodecConfig,
) -> Result<(SparseBinary, SparseBinary)> {
    let lens = catalog.category_lens();
    let to_cells = |rows: Vec<Vec<usize>>| -> SparseBinary {
        rows.into_iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.into_iter().map(move |p| (c, p)))
            .collect()
    };
    Ok((
        to_cells(decode_matrix(first, &lens, cfg)?),
        to_cells(decode_matrix(second, &lens, cfg)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::codec::reference_decode;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_category_is_all_zero() {
        let cfg = CodecConfig::with_width(16);
        assert_eq!(encode_row(&[], &cfg).unwrap(), BitRow::zeros(16));
        assert_eq!(decode_row(&[0; 16], 7, &cfg), vec![0; 7]);
    }

    #[test]
    fn zero_row_round_trip_is_not_all_zero() {
        let cfg = CodecConfig::with_width(16);
        let coded = encode_row(&[0; 5], &cfg).unwrap();
        assert_ne!(coded, BitRow::zeros(16));
        assert_eq!(decode_row(coded.bits(), 5, &cfg), vec![0; 5]);
    }

    #[test]
    fn framed_row_at_width_32() {
        let cfg = CodecConfig::with_width(32);
        let row = [1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0];
        let coded = encode_row(&row, &cfg).unwrap();
        let payload = encode_symbols(&row, cfg.model());
        let sentinel = 32 - payload.len() - 1;
        assert!(coded.bits()[..sentinel].iter().all(|&b| b == 0));
        assert_eq!(coded.bits()[sentinel], 1);
        assert_eq!(&coded.bits()[sentinel + 1..], payload.as_slice());
        assert_eq!(decode_row(coded.bits(), 12, &cfg), row);
    }

    #[test]
    fn overflow_is_reported_not_truncated() {
        let cfg = CodecConfig::with_width(8);
        let row: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        match encode_row(&row, &cfg) {
            Err(Error::CodeOverflow { needed, width, len, ones, .. }) => {
                assert!(needed > width);
                assert_eq!((len, ones), (40, 20));
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn random_patterns_decode_like_reference() {
        let cfg = CodecConfig::with_width(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let bits: Vec<u8> = (0..32).map(|_| rng.random_range(0..2)).collect();
            let expect = match bits.iter().position(|&b| b == 1) {
                None => vec![0; 10],
                Some(s) => reference_decode(&bits[s + 1..], 10, 1, 2),
            };
            assert_eq!(decode_row(&bits, 10, &cfg), expect);
        }
    }

    fn small_catalog() -> Catalog {
        let pairs: Vec<(String, String)> = (0..60)
            .map(|i| (format!("{i:03}"), format!("c{}", i % 4)))
            .collect();
        Catalog::from_pairs(pairs).unwrap()
    }

    fn pair(first: &[(usize, usize)], second: &[(usize, usize)]) -> InteractionMatrixPair {
        InteractionMatrixPair {
            visitor_id: "v".into(),
            segment: 1,
            first: first.iter().copied().collect(),
            second: second.iter().copied().collect(),
        }
    }

    #[test]
    fn empty_pair_encodes_each_row_as_zero_sequence() {
        let cat = small_catalog();
        let cfg = CodecConfig::with_width(24);
        let (v, b) = encode_matrix(&pair(&[], &[]), &cat, &cfg).unwrap();
        assert_eq!(v, b);
        for c in 0..cat.n_categories() {
            let expect = encode_row(&vec![0; cat.category_len(c)], &cfg).unwrap();
            assert_eq!(v.row(c), expect.bits());
        }
    }

    #[test]
    fn single_cell_changes_only_its_row() {
        let cat = small_catalog();
        let cfg = CodecConfig::with_width(24);
        let (empty, _) = encode_matrix(&pair(&[], &[]), &cat, &cfg).unwrap();
        let (one, _) = encode_matrix(&pair(&[(0, 0)], &[]), &cat, &cfg).unwrap();
        assert_ne!(one.row(0), empty.row(0));
        for c in 1..cat.n_categories() {
            assert_eq!(one.row(c), empty.row(c));
        }
    }

    #[test]
    fn matrix_round_trip_and_parallel_equivalence() {
        let cat = small_catalog();
        let cfg = CodecConfig::with_width(40);
        let lens = cat.category_lens();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut cells = |k: usize| -> Vec<(usize, usize)> {
                (0..k)
                    .map(|_| {
                        let c = rng.random_range(0..4);
                        (c, rng.random_range(0..lens[c]))
                    })
                    .collect()
            };
            let p = pair(&cells(4), &cells(2));
            let (v, b) = encode_matrix(&p, &cat, &cfg).unwrap();
            let (dv, db) = decode_pair(&v, &b, &cat, &cfg).unwrap();
            assert_eq!((dv, db), (p.first.clone(), p.second.clone()));
            assert_eq!(
                decode_matrix(&v, &lens, &cfg).unwrap(),
                decode_matrix_sequential(&v, &lens, &cfg).unwrap()
            );
        }
        let zero = CodedMatrix::zeros(4, 40, cat.fingerprint());
        assert!(decode_matrix(&zero, &lens, &cfg).unwrap().iter().all(Vec::is_empty));
    }

    #[test]
    fn cell_outside_catalog_is_rejected() {
        let cat = small_catalog();
        let cfg = CodecConfig::with_width(24);
        assert!(encode_matrix(&pair(&[(9, 0)], &[]), &cat, &cfg).is_err());
        assert!(encode_matrix(&pair(&[(0, 15)], &[]), &cat, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(row in prop::collection::vec(prop::bool::weighted(0.08), 0..300)) {
            let row: Vec<u8> = row.into_iter().map(u8::from).collect();
            let cfg = CodecConfig::with_width(coded_len(&row, &CodecConfig::default()).max(2));
            let coded = encode_row(&row, &cfg).unwrap();
            prop_assert_eq!(decode_row(coded.bits(), row.len(), &cfg), row);
        }

        #[test]
        fn prefix_invariance(row in prop::collection::vec(prop::bool::weighted(0.1), 1..120), extra in 0usize..64) {
            let row: Vec<u8> = row.into_iter().map(u8::from).collect();
            let need = coded_len(&row, &CodecConfig::default());
            let narrow = encode_row(&row, &CodecConfig::with_width(need)).unwrap();
            let wide = encode_row(&row, &CodecConfig::with_width(need + extra)).unwrap();
            prop_assert_eq!(&wide.bits()[extra..], narrow.bits());
            prop_assert!(wide.bits()[..extra].iter().all(|&b| b == 0));
            prop_assert_eq!(decode_row(wide.bits(), row.len(), &CodecConfig::default()), row);
        }

        #[test]
        fn decode_is_total(bits in prop::collection::vec(0u8..2, 2..300), n in 0usize..2000) {
            let out = decode_row(&bits, n, &CodecConfig::default());
            prop_assert_eq!(out.len(), n);
        }
    }
}
