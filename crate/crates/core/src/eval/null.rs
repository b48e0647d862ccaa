//! Random recommendation sets at matched density.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{cvr, jaccard, MetricValue};
use crate::ingest::{Catalog, SparseBinary};
use crate::recgen::RecommendationSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullMetric {
    /// Zero when every trial was skipped.
    pub percent: f64,
    pub contributing: usize,
    pub skipped: usize,
    pub all_skipped: bool,
}

impl NullMetric {
    fn from(r: Result<MetricValue>, trials: usize) -> Result<Self> {
        match r {
            Ok(m) => Ok(NullMetric {
                percent: m.percent,
                contributing: m.contributing,
                skipped: m.skipped,
                all_skipped: false,
            }),
            Err(Error::UndefinedMetric { .. }) => Ok(NullMetric {
                percent: 0.0,
                contributing: 0,
                skipped: trials,
                all_skipped: true,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullResult {
    pub trials: usize,
    pub items_view: usize,
    pub items_buy: usize,
    pub cvr: NullMetric,
    pub jaccard: NullMetric,
}

/// Items drawn per channel for a density over `total` catalog cells.
pub fn items_for_density(density: f64, total: usize) -> usize {
    ((density * total as f64).round() as usize).min(total)
}

fn draw(catalog: &Catalog, k: usize, starts: &[usize], rng: &mut ChaCha8Rng) -> SparseBinary {
    index::sample(rng, catalog.total_items(), k)
        .into_iter()
        .map(|flat| {
            let c = starts.partition_point(|&s| s <= flat) - 1;
            (c, flat - starts[c])
        })
        .collect()
}

/// One random realization per trial: each channel gets `round(density * N)`
/// distinct cells drawn uniformly from the `N` catalog cells, independently
/// across channels. Trial `t` uses stream `t` of a generator seeded with `seed`.
pub fn null_sets(density_v: f64, density_b: f64, catalog: &Catalog, n_trials: usize, seed: u64) -> Result<Vec<RecommendationSet>> {
    for d in [density_v, density_b] {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::Contract(format!("density {d} not in [0, 1]")));
        }
    }
    let total = catalog.total_items();
    let (kv, kb) = (items_for_density(density_v, total), items_for_density(density_b, total));
    let mut starts = Vec::with_capacity(catalog.n_categories());
    let mut acc = 0;
    for len in catalog.category_lens() {
        starts.push(acc);
        acc += len;
    }
    Ok((0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let v = draw(catalog, kv, &starts, &mut rng);
            let b = draw(catalog, kb, &starts, &mut rng);
            RecommendationSet::from_cells(0, &v, &b)
        })
        .collect())
}

pub fn null_trials(density_v: f64, density_b: f64, catalog: &Catalog, n_trials: usize, seed: u64) -> Result<NullResult> {
    if n_trials == 0 {
        return Err(Error::Config("null trial count must be positive".into()));
    }
    let sets = null_sets(density_v, density_b, catalog, n_trials, seed)?;
    let total = catalog.total_items();
    Ok(NullResult {
        trials: n_trials,
        items_view: items_for_density(density_v, total),
        items_buy: items_for_density(density_b, total),
        cvr: NullMetric::from(cvr(&sets), n_trials)?,
        jaccard: NullMetric::from(jaccard(&sets), n_trials)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::conversion;
    use num_traits::ToPrimitive;

    fn flat(n: usize) -> Catalog {
        Catalog::from_pairs((0..n).map(|i| (format!("{i:04}"), "c".to_string()))).unwrap()
    }

    #[test]
    fn zero_density_is_flagged() {
        let r = null_trials(0.0, 0.0, &flat(50), 20, 1).unwrap();
        assert!(r.cvr.all_skipped && r.jaccard.all_skipped);
        assert_eq!(r.cvr.percent, 0.0);
        assert_eq!(r.cvr.skipped, 20);
    }

    #[test]
    fn draw_sizes_match_density() {
        let cat = Catalog::from_pairs((0..30).map(|i| (format!("{i}"), format!("{}", i % 4)))).unwrap();
        let sets = null_sets(0.2, 0.1, &cat, 10, 3).unwrap();
        for s in &sets {
            assert_eq!(s.n_view(), 6);
            assert_eq!(s.n_buy(), 3);
            for (&c, ps) in &s.items_v {
                assert!(ps.iter().all(|&p| p < cat.category_len(c)));
            }
        }
        assert_eq!(sets, null_sets(0.2, 0.1, &cat, 10, 3).unwrap());
        assert!(null_sets(1.5, 0.1, &cat, 10, 3).is_err());
    }

    #[test]
    fn single_category_matches_hypergeometric_mean() {
        let n = 200;
        let (kv, kb) = (20, 10);
        let trials = 4000;
        let cat = flat(n);
        let sets = null_sets(kv as f64 / n as f64, kb as f64 / n as f64, &cat, trials, 7).unwrap();
        let xs: Vec<f64> = sets.iter().map(|s| conversion(s).unwrap().to_f64().unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let p = kb as f64 / n as f64;
        let var = kv as f64 * p * (1.0 - p) * (n - kv) as f64 / (n - 1) as f64 / (kv * kv) as f64;
        let sigma = (var / trials as f64).sqrt();
        assert!((mean - p).abs() < 3.0 * sigma, "mean {mean} vs {p} (sigma {sigma})");
    }
}
