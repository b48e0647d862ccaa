use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ingest::Catalog;
use crate::recgen::RecommendationSet;
use crate::{Error, Result};

/// A percentage averaged over the realizations for which it is defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub percent: f64,
    pub contributing: usize,
    pub skipped: usize,
}

/// Exact mean of the defined per-realization values, with counts.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMean {
    pub mean: Option<BigRational>,
    pub contributing: usize,
    pub skipped: usize,
}

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn exact_mean(values: impl Iterator<Item = Option<BigRational>>) -> ExactMean {
    let mut sum = BigRational::zero();
    let (mut contributing, mut skipped) = (0, 0);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                contributing += 1;
            }
            None => skipped += 1,
        }
    }
    ExactMean {
        mean: (contributing > 0).then(|| sum / BigInt::from(contributing)),
        contributing,
        skipped,
    }
}

/// Conversion fraction of one realization: over the categories recommended in
/// both channels, the share of view items that are also buy items. `None`
/// when there is no such category.
pub fn conversion(set: &RecommendationSet) -> Option<BigRational> {
    let (mut viewed, mut both) = (0, 0);
    for c in set.c_v.intersection(&set.c_b) {
        let v = &set.items_v[c];
        viewed += v.len();
        both += v.intersection(&set.items_b[c]).count();
    }
    (viewed > 0).then(|| ratio(both, viewed))
}

/// Jaccard index of the two category sets; `None` when both are empty.
pub fn category_similarity(set: &RecommendationSet) -> Option<BigRational> {
    let union = set.c_v.union(&set.c_b).count();
    (union > 0).then(|| ratio(set.c_v.intersection(&set.c_b).count(), union))
}

pub fn cvr_exact(sets: &[RecommendationSet]) -> ExactMean {
    exact_mean(sets.iter().map(conversion))
}

pub fn jaccard_exact(sets: &[RecommendationSet]) -> ExactMean {
    exact_mean(sets.iter().map(category_similarity))
}

fn to_percent(metric: &'static str, m: ExactMean, n: usize) -> Result<MetricValue> {
    if n == 0 {
        return Err(Error::Contract(format!("{metric} needs at least one realization")));
    }
    match m.mean {
        Some(v) => Ok(MetricValue {
            percent: (v * BigInt::from(100)).to_f64().unwrap_or(f64::NAN),
            contributing: m.contributing,
            skipped: m.skipped,
        }),
        None => Err(Error::UndefinedMetric {
            metric,
            skipped: m.skipped,
        }),
    }
}

/// Conversion rate in percent.
pub fn cvr(sets: &[RecommendationSet]) -> Result<MetricValue> {
    to_percent("cvr", cvr_exact(sets), sets.len())
}

/// Mean category Jaccard similarity in percent.
pub fn jaccard(sets: &[RecommendationSet]) -> Result<MetricValue> {
    to_percent("jaccard", jaccard_exact(sets), sets.len())
}

/// Mean fraction of catalog cells set, per channel.
pub fn density(sets: &[RecommendationSet], catalog: &Catalog) -> (f64, f64) {
    if sets.is_empty() || catalog.total_items() == 0 {
        return (0.0, 0.0);
    }
    let n = catalog.total_items() as f64;
    let k = sets.len() as f64;
    let v: usize = sets.iter().map(RecommendationSet::n_view).sum();
    let b: usize = sets.iter().map(RecommendationSet::n_buy).sum();
    (v as f64 / n / k, b as f64 / n / k)
}

/// Mean number of distinct items and of distinct categories per realization,
/// counting both channels together.
pub fn mean_counts(sets: &[RecommendationSet]) -> (f64, f64) {
    if sets.is_empty() {
        return (0.0, 0.0);
    }
    let k = sets.len() as f64;
    let (mut items, mut cats) = (0usize, 0usize);
    for s in sets {
        let cells: BTreeSet<(usize, usize)> = s.view_cells().union(&s.buy_cells()).copied().collect();
        items += cells.len();
        cats += s.c_v.union(&s.c_b).count();
    }
    (items as f64 / k, cats as f64 / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SparseBinary;

    fn set(v: &[(usize, usize)], b: &[(usize, usize)]) -> RecommendationSet {
        let v: SparseBinary = v.iter().copied().collect();
        let b: SparseBinary = b.iter().copied().collect();
        RecommendationSet::from_cells(1, &v, &b)
    }

    #[test]
    fn half_converted() {
        let s = set(&[(0, 0), (0, 1), (0, 2), (0, 3)], &[(0, 1), (0, 2)]);
        assert_eq!(cvr(&[s]).unwrap().percent, 50.0);
    }

    #[test]
    fn full_conversion() {
        let s = set(&[(0, 0), (2, 1)], &[(0, 0), (2, 1)]);
        assert_eq!(cvr(&[s]).unwrap().percent, 100.0);
    }

    #[test]
    fn non_overlapping_categories_are_ignored() {
        // Category 1 has views but no buys, so it is outside the overlap.
        let s = set(&[(0, 0), (0, 1), (1, 0), (1, 1)], &[(0, 0)]);
        assert_eq!(cvr(&[s]).unwrap().percent, 50.0);
    }

    #[test]
    fn jaccard_cases() {
        let s = set(&[(0, 0), (1, 0), (2, 0)], &[(1, 1), (2, 1), (3, 1)]);
        assert_eq!(jaccard(&[s]).unwrap().percent, 50.0);
        let s = set(&[(0, 0), (1, 0)], &[(0, 3), (1, 2)]);
        assert_eq!(jaccard(&[s]).unwrap().percent, 100.0);
        let s = set(&[(0, 0)], &[(1, 0)]);
        assert_eq!(jaccard(&[s]).unwrap().percent, 0.0);
    }

    #[test]
    fn skips_are_counted() {
        let sets = vec![
            set(&[], &[]),
            set(&[(0, 0)], &[(1, 0)]),
            set(&[(0, 0), (0, 1)], &[(0, 1)]),
        ];
        let c = cvr(&sets).unwrap();
        assert_eq!((c.contributing, c.skipped), (1, 2));
        assert_eq!(c.percent, 50.0);
        let j = jaccard(&sets).unwrap();
        assert_eq!((j.contributing, j.skipped), (2, 1));
        assert_eq!(j.percent, 50.0);
        assert!(matches!(
            cvr(&sets[..2]),
            Err(Error::UndefinedMetric { metric: "cvr", skipped: 2 })
        ));
        assert!(matches!(cvr(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn density_and_counts() {
        let cat = Catalog::from_pairs([("a", "x"), ("b", "x"), ("c", "y"), ("d", "y")]).unwrap();
        assert_eq!(density(&[], &cat), (0.0, 0.0));
        let one = set(&[(1, 0)], &[]);
        assert_eq!(density(&[one.clone()], &cat), (0.25, 0.0));
        let two = set(&[(0, 0), (1, 0)], &[(0, 0), (0, 1)]);
        assert_eq!(density(&[one.clone(), two.clone()], &cat), (0.375, 0.25));
        assert_eq!(mean_counts(&[one, two]), (2.0, 1.5));
    }
}
