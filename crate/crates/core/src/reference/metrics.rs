//! Brute-force metric definitions over the full (category, position) grid, and
//! exact null expectations by enumerating every possible random draw.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::recgen::RecommendationSet;

fn has(set: &RecommendationSet, view: bool, c: usize, p: usize) -> bool {
    let m = if view { &set.items_v } else { &set.items_b };
    m.get(&c).is_some_and(|s| s.contains(&p))
}

fn row_nonempty(set: &RecommendationSet, view: bool, c: usize, len: usize) -> bool {
    (0..len).any(|p| has(set, view, c, p))
}

/// Per-realization conversion fraction by scanning every cell of `lens`.
pub fn brute_conversion(set: &RecommendationSet, lens: &[usize]) -> Option<BigRational> {
    let mut viewed = 0i64;
    let mut both = 0i64;
    for (c, &len) in lens.iter().enumerate() {
        if !(row_nonempty(set, true, c, len) && row_nonempty(set, false, c, len)) {
            continue;
        }
        for p in 0..len {
            if has(set, true, c, p) {
                viewed += 1;
                if has(set, false, c, p) {
                    both += 1;
                }
            }
        }
    }
    (viewed != 0).then(|| BigRational::new(BigInt::from(both), BigInt::from(viewed)))
}

pub fn brute_similarity(set: &RecommendationSet, lens: &[usize]) -> Option<BigRational> {
    let mut inter = 0i64;
    let mut union = 0i64;
    for (c, &len) in lens.iter().enumerate() {
        let v = row_nonempty(set, true, c, len);
        let b = row_nonempty(set, false, c, len);
        inter += i64::from(v && b);
        union += i64::from(v || b);
    }
    (union != 0).then(|| BigRational::new(BigInt::from(inter), BigInt::from(union)))
}

/// `(mean percent, contributing, skipped)`; the mean is `None` if nothing contributed.
pub fn brute_percent(
    sets: &[RecommendationSet],
    lens: &[usize],
    f: fn(&RecommendationSet, &[usize]) -> Option<BigRational>,
) -> (Option<BigRational>, usize, usize) {
    let values: Vec<Option<BigRational>> = sets.iter().map(|s| f(s, lens)).collect();
    let defined: Vec<&BigRational> = values.iter().flatten().collect();
    let skipped = values.len() - defined.len();
    if defined.is_empty() {
        return (None, 0, skipped);
    }
    let mut sum = BigRational::zero();
    for v in &defined {
        sum += *v;
    }
    let mean = sum * BigInt::from(100) / BigInt::from(defined.len());
    (Some(mean), defined.len(), skipped)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Exact distribution summary of one metric under the null draw.
#[derive(Clone, Debug, PartialEq)]
pub struct NullMoments {
    /// Probability that the metric is defined.
    pub defined: BigRational,
    /// Mean and variance of the metric fraction, conditional on being defined.
    pub mean: Option<BigRational>,
    pub variance: Option<BigRational>,
}

fn moments(values: &[Option<BigRational>]) -> NullMoments {
    let defined: Vec<&BigRational> = values.iter().flatten().collect();
    let total = BigInt::from(values.len());
    let p = BigRational::new(BigInt::from(defined.len()), total);
    if defined.is_empty() {
        return NullMoments {
            defined: p,
            mean: None,
            variance: None,
        };
    }
    let n = BigInt::from(defined.len());
    let mut s = BigRational::zero();
    let mut s2 = BigRational::zero();
    for v in &defined {
        s += *v;
        s2 += *v * *v;
    }
    let mean = s / n.clone();
    let variance = s2 / n - mean.clone() * mean.clone();
    NullMoments {
        defined: p,
        mean: Some(mean),
        variance: Some(variance),
    }
}

/// Enumerates every pair of `kv`-subset and `kb`-subset of the catalog cells
/// (categories of sizes `lens`), all equally likely, and returns the moments
/// of the conversion fraction and of the category Jaccard index.
pub fn null_moments(lens: &[usize], kv: usize, kb: usize) -> (NullMoments, NullMoments) {
    let cells: Vec<(usize, usize)> = lens
        .iter()
        .enumerate()
        .flat_map(|(c, &len)| (0..len).map(move |p| (c, p)))
        .collect();
    let to_set = |idx: &[usize]| idx.iter().map(|&i| cells[i]).collect();
    let vs = combinations(cells.len(), kv);
    let bs = combinations(cells.len(), kb);
    let mut conv = Vec::with_capacity(vs.len() * bs.len());
    let mut sim = Vec::with_capacity(vs.len() * bs.len());
    for v in &vs {
        for b in &bs {
            let set = RecommendationSet::from_cells(0, &to_set(v), &to_set(b));
            conv.push(brute_conversion(&set, lens));
            sim.push(brute_similarity(&set, lens));
        }
    }
    (moments(&conv), moments(&sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn single_category_closed_form() {
        // One category: the conversion fraction has mean kb / n.
        let (c, j) = null_moments(&[6], 3, 2);
        assert_eq!(c.mean.unwrap(), BigRational::new(2.into(), 6.into()));
        assert_eq!(j.mean.unwrap().to_f64().unwrap(), 1.0);
    }

    #[test]
    fn skip_probability() {
        // Two singleton categories, one view and one buy: overlap half the time.
        let (c, j) = null_moments(&[1, 1], 1, 1);
        assert_eq!(c.defined, BigRational::new(1.into(), 2.into()));
        assert_eq!(c.mean.unwrap().to_f64().unwrap(), 1.0);
        assert_eq!(j.mean.unwrap().to_f64().unwrap(), 0.5);
    }
}
