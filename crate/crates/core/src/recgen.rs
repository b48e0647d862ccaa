//! Sampling the trained generators and turning draws into item sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{decode_pair, CodecConfig, CodedMatrix};
use crate::gan::{sample_latent, CoupledGan};
use crate::ingest::{Catalog, SparseBinary};
use crate::nn::Tensor;
use crate::{Error, Result};

/// Decoded recommendations of one realization. Items are `(category, position)`
/// cells of the catalog.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecommendationSet {
    pub segment: usize,
    pub c_v: BTreeSet<usize>,
    pub c_b: BTreeSet<usize>,
    pub items_v: BTreeMap<usize, BTreeSet<usize>>,
    pub items_b: BTreeMap<usize, BTreeSet<usize>>,
}

fn group(cells: &SparseBinary) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(c, p) in cells {
        out.entry(c).or_default().insert(p);
    }
    out
}

impl RecommendationSet {
    pub fn from_cells(segment: usize, view: &SparseBinary, buy: &SparseBinary) -> Self {
        let items_v = group(view);
        let items_b = group(buy);
        RecommendationSet {
            segment,
            c_v: items_v.keys().copied().collect(),
            c_b: items_b.keys().copied().collect(),
            items_v,
            items_b,
        }
    }

    pub fn view_cells(&self) -> SparseBinary {
        cells(&self.items_v)
    }

    pub fn buy_cells(&self) -> SparseBinary {
        cells(&self.items_b)
    }

    pub fn n_view(&self) -> usize {
        self.items_v.values().map(BTreeSet::len).sum()
    }

    pub fn n_buy(&self) -> usize {
        self.items_b.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items_v.is_empty() && self.items_b.is_empty()
    }
}

fn cells(items: &BTreeMap<usize, BTreeSet<usize>>) -> SparseBinary {
    items
        .iter()
        .flat_map(|(&c, ps)| ps.iter().map(move |&p| (c, p)))
        .collect()
}

/// Raw generator output of one draw: view and buy matrices, `[rows, width]`.
pub type RawRealization = (Tensor<f32>, Tensor<f32>);

const SAMPLE_BATCH: usize = 256;

/// `n` inference-mode draws for `segment`, each with a fresh standard-normal
/// latent vector. The latent stream depends only on `seed` and `segment`.
pub fn sample_segment(model: &CoupledGan<f32>, segment: usize, n: usize, seed: u64) -> Result<Vec<RawRealization>> {
    if n == 0 {
        return Err(Error::Contract("number of realizations must be positive".into()));
    }
    let cfg = &model.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(segment as u64);
    let shape = [cfg.rows, cfg.width];
    let mut out = Vec::with_capacity(n);
    let mut left = n;
    while left > 0 {
        let b = left.min(SAMPLE_BATCH);
        let z = sample_latent(b, cfg.z_dim, &mut rng);
        let [v, p] = model.generate_batch(&z, &vec![segment; b])?;
        for i in 0..b {
            out.push((
                Tensor::from_vec(&shape, v.row(i).to_vec()),
                Tensor::from_vec(&shape, p.row(i).to_vec()),
            ));
        }
        left -= b;
    }
    Ok(out)
}

pub const DEFAULT_THRESHOLD: f32 = 0.0;

/// Bit is 1 iff the element is strictly above `threshold`.
pub fn binarize(x: &Tensor<f32>, threshold: f32, catalog_hash: u64) -> CodedMatrix {
    let &[rows, width] = x.shape() else {
        panic!("binarize expects [rows, width], got {:?}", x.shape());
    };
    let bits = x.data().iter().map(|&v| u8::from(v > threshold)).collect();
    CodedMatrix::from_bits(rows, width, catalog_hash, bits).expect("shape checked above")
}

pub fn decode_realization(
    first: &CodedMatrix,
    second: &CodedMatrix,
    segment: usize,
    catalog: &Catalog,
    cfg: &CodecConfig,
) -> Result<RecommendationSet> {
    let (v, b) = decode_pair(first, second, catalog, cfg)?;
    Ok(RecommendationSet::from_cells(segment, &v, &b))
}

/// Binarizes and decodes a batch of draws, in parallel, keeping input order.
pub fn decode_all(
    raw: &[RawRealization],
    segment: usize,
    threshold: f32,
    catalog: &Catalog,
    cfg: &CodecConfig,
) -> Result<Vec<RecommendationSet>> {
    let hash = catalog.fingerprint();
    raw.par_iter()
        .map(|(v, b)| {
            decode_realization(
                &binarize(v, threshold, hash),
                &binarize(b, threshold, hash),
                segment,
                catalog,
                cfg,
            )
        })
        .collect()
}

/// Uniform subset without replacement of size `round(fraction * n)`, in the
/// original order.
pub fn subsample<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("subsample fraction {fraction} not in (0, 1]")));
    }
    let k = (fraction * items.len() as f64).round() as usize;
    if k >= items.len() {
        return Ok(items.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, items.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| items[i].clone()).collect())
}

fn write_cells<W: Write>(out: &mut W, items: &BTreeMap<usize, BTreeSet<usize>>, catalog: &Catalog) -> Result<()> {
    let mut first = true;
    for (&c, ps) in items {
        for &p in ps {
            if !first {
                write!(out, " ")?;
            }
            first = false;
            write!(out, "{}:{}", catalog.category_id(c), catalog.item_id(c, p))?;
        }
    }
    Ok(())
}

/// One line per realization:
/// `segment<TAB>index<TAB>V<TAB>cat:item ...<TAB>B<TAB>cat:item ...`, with cells in
/// catalog order. `index` numbers the realizations within their segment.
pub fn write_realizations<W: Write>(mut out: W, sets: &[RecommendationSet], catalog: &Catalog) -> Result<()> {
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&i| sets[i].segment);
    let mut counter: BTreeMap<usize, usize> = BTreeMap::new();
    for i in order {
        let s = &sets[i];
        let idx = counter.entry(s.segment).or_default();
        write!(out, "{}\t{}\tV\t", s.segment, idx)?;
        write_cells(&mut out, &s.items_v, catalog)?;
        write!(out, "\tB\t")?;
        write_cells(&mut out, &s.items_b, catalog)?;
        writeln!(out)?;
        *idx += 1;
    }
    out.flush()?;
    Ok(())
}

fn parse_cells(field: &str, catalog: &Catalog, line: usize) -> Result<SparseBinary> {
    let mut cells = SparseBinary::new();
    for tok in field.split_whitespace() {
        let bad = || Error::Validation(format!("realizations line {line}: bad cell {tok:?}"));
        let (cat, item) = tok.split_once(':').ok_or_else(bad)?;
        let (c, p) = catalog.locate(item).ok_or_else(bad)?;
        if catalog.category_id(c) != cat {
            return Err(bad());
        }
        cells.insert((c, p));
    }
    Ok(cells)
}

pub fn read_realizations<R: BufRead>(input: R, catalog: &Catalog) -> Result<Vec<RecommendationSet>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 || f[2] != "V" || f[4] != "B" {
            return Err(Error::Validation(format!("realizations line {}: malformed record", n + 1)));
        }
        let segment = f[0]
            .parse()
            .map_err(|_| Error::Validation(format!("realizations line {}: bad segment", n + 1)))?;
        let v = parse_cells(f[3], catalog, n + 1)?;
        let b = parse_cells(f[5], catalog, n + 1)?;
        out.push(RecommendationSet::from_cells(segment, &v, &b));
    }
    Ok(out)
}
