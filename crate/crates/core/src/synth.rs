//! Synthetic event logs with a planted, segment-dependent (view, buy) structure.
//!
//! Synthetic segment `s` of `n` maps to click-depth segment `5 - n + s`. Each
//! visitor views every preferred item of its segment's category block with
//! probability `p_view` and buys each viewed item with `p_buy_given_view`, then
//! add-to-cart events pad its click depth into the segment's depth bin.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{Catalog, EventKind, RawEvent, SparseBinary, DEFAULT_BIN_EDGES, N_SEGMENTS};
use crate::recgen::RecommendationSet;
use crate::{Error, Result};

/// Preferred items given to the deepest segment when blocks are laid out
/// automatically; it has no upper depth limit of its own.
pub const TOP_SEGMENT_ITEMS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_categories: usize,
    pub items_per_category: usize,
    pub n_segments: usize,
    pub visitors_per_segment: usize,
    /// Category indices preferred by each synthetic segment.
    pub blocks: Vec<Vec<usize>>,
    pub preferred_per_category: usize,
    pub p_view: f64,
    pub p_buy_given_view: f64,
    pub seed: u64,
}

/// Click-depth segment of synthetic segment `s`.
pub fn depth_segment(n_segments: usize, s: usize) -> usize {
    N_SEGMENTS - n_segments + s
}

/// `[low, high)` click-depth range of a depth segment under the default edges.
fn depth_range(t: usize) -> (u64, u64) {
    let lo = if t == 0 { 0 } else { DEFAULT_BIN_EDGES[t - 1] };
    let hi = if t < DEFAULT_BIN_EDGES.len() { DEFAULT_BIN_EDGES[t] } else { u64::MAX };
    (lo, hi)
}

/// Most preferred items a visitor of depth segment `t` may have, so that one
/// view and one buy of each stays below the bin's upper edge.
fn item_capacity(t: usize) -> usize {
    match depth_range(t).1 {
        u64::MAX => TOP_SEGMENT_ITEMS,
        hi => ((hi - 1) / 2) as usize,
    }
}

impl SynthConfig {
    /// Contiguous, disjoint blocks from category 0, each as large as its
    /// segment's depth bin allows.
    pub fn new(
        n_categories: usize,
        items_per_category: usize,
        n_segments: usize,
        visitors_per_segment: usize,
        p_view: f64,
        p_buy_given_view: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_segments == 0 || n_segments >= N_SEGMENTS {
            return Err(Error::Config(format!("n_segments must be in 1..={}", N_SEGMENTS - 1)));
        }
        let mut blocks = Vec::with_capacity(n_segments);
        let mut next = 0;
        for s in 0..n_segments {
            let size = item_capacity(depth_segment(n_segments, s));
            blocks.push((next..next + size).collect());
            next += size;
        }
        let cfg = SynthConfig {
            n_categories,
            items_per_category,
            n_segments,
            visitors_per_segment,
            blocks,
            preferred_per_category: 1,
            p_view,
            p_buy_given_view,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_segments == 0 || self.n_segments >= N_SEGMENTS {
            return bad(format!("n_segments must be in 1..={}", N_SEGMENTS - 1));
        }
        if self.blocks.len() != self.n_segments {
            return bad(format!("{} blocks for {} segments", self.blocks.len(), self.n_segments));
        }
        if self.n_categories == 0 || self.items_per_category == 0 {
            return bad("catalog dimensions must be positive".into());
        }
        if self.preferred_per_category == 0 || self.preferred_per_category > self.items_per_category {
            return bad(format!(
                "preferred_per_category {} not in 1..={}",
                self.preferred_per_category, self.items_per_category
            ));
        }
        for p in [self.p_view, self.p_buy_given_view] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} not in [0, 1]"));
            }
        }
        for (s, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return bad(format!("block of segment {s} is empty"));
            }
            if let Some(c) = block.iter().find(|&&c| c >= self.n_categories) {
                return bad(format!("block of segment {s} names category {c} of {}", self.n_categories));
            }
            let items = block.len() * self.preferred_per_category;
            let t = depth_segment(self.n_segments, s);
            let (_, hi) = depth_range(t);
            if hi != u64::MAX && 2 * items as u64 >= hi {
                return bad(format!(
                    "segment {s} has {items} preferred items; its click depth could reach {} (bin ends at {hi})",
                    2 * items
                ));
            }
        }
        Ok(())
    }

    pub fn category_id(&self, c: usize) -> String {
        format!("{}", 100 + c)
    }

    pub fn item_id(&self, c: usize, i: usize) -> String {
        format!("{}", 100_000 + c * self.items_per_category + i)
    }

    pub fn catalog(&self) -> Catalog {
        let pairs = (0..self.n_categories)
            .flat_map(|c| (0..self.items_per_category).map(move |i| (c, i)))
            .map(|(c, i)| (self.item_id(c, i), self.category_id(c)));
        Catalog::from_pairs(pairs).expect("synthetic ids are unique")
    }
}

/// Planted preference structure of one synthetic segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub synth_segment: usize,
    /// Click-depth segment that ingest assigns to these visitors.
    pub segment: usize,
    /// Preferred `(category, position)` cells.
    pub preferred: Vec<(usize, usize)>,
    pub visitors: usize,
    pub views: usize,
    pub buys: usize,
    pub visitors_with_buy: usize,
    pub planted_cvr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub segments: Vec<SegmentTruth>,
    pub oracle_cvr: f64,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub events: Vec<RawEvent>,
    pub catalog: Catalog,
    pub truth: SynthTruth,
    /// The true (view, buy) sets of every visitor, in generation order.
    pub visitor_sets: Vec<RecommendationSet>,
}

impl SynthOutput {
    pub fn events_csv(&self) -> String {
        let mut s = String::from("timestamp,visitorid,event,itemid\n");
        for e in &self.events {
            s.push_str(&e.to_csv_line());
            s.push('\n');
        }
        s
    }

    pub fn catalog_csv(&self) -> String {
        self.catalog.to_csv()
    }
}

/// Preferred positions per block category, drawn from stream 0 of the seed.
fn preferred_cells(cfg: &SynthConfig) -> Vec<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    cfg.blocks
        .iter()
        .map(|block| {
            block
                .iter()
                .flat_map(|&c| {
                    let ps = chosen.entry(c).or_insert_with(|| {
                        let mut v = index::sample(&mut rng, cfg.items_per_category, cfg.preferred_per_category).into_vec();
                        v.sort_unstable();
                        v
                    });
                    ps.iter().map(move |&p| (c, p)).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect()
}

const BASE_TIMESTAMP: u64 = 1_500_000_000_000;

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let catalog = cfg.catalog();
    let preferred = preferred_cells(cfg);
    let per_visitor: Vec<(Vec<RawEvent>, RecommendationSet)> = (0..cfg.n_segments * cfg.visitors_per_segment)
        .into_par_iter()
        .map(|g| {
            let s = g / cfg.visitors_per_segment;
            let t = depth_segment(cfg.n_segments, s);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(g as u64 + 1);
            let visitor = format!("{}", 1_000_000 + g);
            let mut ts = BASE_TIMESTAMP + g as u64 * 1_000_000;
            let mut events = Vec::new();
            let mut push = |kind, c: usize, p: usize, events: &mut Vec<RawEvent>| {
                events.push(RawEvent::new(ts, &visitor, kind, &cfg.item_id(c, p)));
                ts += 1000;
            };
            let (mut viewed, mut bought) = (SparseBinary::new(), SparseBinary::new());
            for &(c, p) in &preferred[s] {
                if rng.random::<f64>() < cfg.p_view {
                    push(EventKind::View, c, p, &mut events);
                    viewed.insert((c, p));
                    if rng.random::<f64>() < cfg.p_buy_given_view {
                        push(EventKind::Transaction, c, p, &mut events);
                        bought.insert((c, p));
                    }
                }
            }
            let (lo, _) = depth_range(t);
            let mut k = 0;
            while (events.len() as u64) < lo {
                let (c, p) = preferred[s][k % preferred[s].len()];
                push(EventKind::AddToCart, c, p, &mut events);
                k += 1;
            }
            (events, RecommendationSet::from_cells(t, &viewed, &bought))
        })
        .collect();

    let mut segments: Vec<SegmentTruth> = (0..cfg.n_segments)
        .map(|s| SegmentTruth {
            synth_segment: s,
            segment: depth_segment(cfg.n_segments, s),
            preferred: preferred[s].clone(),
            visitors: cfg.visitors_per_segment,
            views: 0,
            buys: 0,
            visitors_with_buy: 0,
            planted_cvr: planted_cvr(cfg, s),
        })
        .collect();
    let mut events = Vec::new();
    let mut visitor_sets = Vec::with_capacity(per_visitor.len());
    for (g, (ev, set)) in per_visitor.into_iter().enumerate() {
        let truth = &mut segments[g / cfg.visitors_per_segment];
        truth.views += set.n_view();
        truth.buys += set.n_buy();
        truth.visitors_with_buy += usize::from(set.n_buy() > 0);
        events.extend(ev);
        visitor_sets.push(set);
    }
    Ok(SynthOutput {
        events,
        catalog,
        truth: SynthTruth {
            segments,
            oracle_cvr: oracle_cvr(cfg),
        },
        visitor_sets,
    })
}

/// Funnel reference: the percentage of viewed items that are bought.
pub fn oracle_cvr(cfg: &SynthConfig) -> f64 {
    100.0 * cfg.p_buy_given_view
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    for _ in 0..n {
        for k in (0..n).rev() {
            let v = pmf[k];
            pmf[k + 1] += v * p;
            pmf[k] = v * (1.0 - p);
        }
    }
    pmf
}

/// Expected conversion rate, in percent, of a visitor's true (view, buy) sets
/// in synthetic segment `s`, conditional on the rate being defined (at least
/// one buy). Zero when no visitor can buy.
pub fn planted_cvr(cfg: &SynthConfig, s: usize) -> f64 {
    let k = cfg.preferred_per_category;
    // Joint law of (views, buys) within one category.
    let pv = binomial_pmf(k, cfg.p_view);
    let mut cat: Vec<(usize, usize, f64)> = Vec::new();
    for (v, &p) in pv.iter().enumerate() {
        for (b, &q) in binomial_pmf(v, cfg.p_buy_given_view).iter().enumerate() {
            if p * q > 0.0 {
                cat.push((v, b, p * q));
            }
        }
    }
    // Totals over categories with at least one buy.
    let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::from([((0, 0), 1.0)]);
    for _ in &cfg.blocks[s] {
        let mut next: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(vt, bt), &p) in &dist {
            for &(v, b, q) in &cat {
                let key = if b > 0 { (vt + v, bt + b) } else { (vt, bt) };
                *next.entry(key).or_default() += p * q;
            }
        }
        dist = next;
    }
    let (mut mass, mut expect) = (0.0, 0.0);
    for (&(v, b), &p) in &dist {
        if b > 0 {
            mass += p;
            expect += p * b as f64 / v as f64;
        }
    }
    if mass == 0.0 {
        0.0
    } else {
        100.0 * expect / mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cvr;
    use crate::ingest::{segment_visitors, EventLog};
    use std::collections::{BTreeSet, HashMap};

    fn standard(seed: u64) -> SynthConfig {
        SynthConfig::new(40, 50, 4, 200, 0.3, 0.5, seed).unwrap()
    }

    #[test]
    fn deterministic_limit() {
        let mut cfg = SynthConfig::new(20, 5, 2, 1, 1.0, 1.0, 1).unwrap();
        cfg.blocks = vec![vec![0], vec![3, 4]];
        let out = generate(&cfg).unwrap();
        let second: Vec<&RawEvent> = out.events.iter().filter(|e| e.visitor_id == "1000001").collect();
        let views: BTreeSet<&str> = second.iter().filter(|e| e.kind == EventKind::View).map(|e| e.item_id.as_str()).collect();
        let buys: BTreeSet<&str> = second
            .iter()
            .filter(|e| e.kind == EventKind::Transaction)
            .map(|e| e.item_id.as_str())
            .collect();
        assert_eq!(views.len(), 2);
        assert_eq!(views, buys);
        assert_eq!(second.iter().filter(|e| e.kind == EventKind::View).count(), 2);
        assert_eq!(second.iter().filter(|e| e.kind == EventKind::Transaction).count(), 2);
    }

    #[test]
    fn no_buys_without_conversion() {
        let cfg = SynthConfig::new(40, 50, 4, 50, 0.3, 0.0, 2).unwrap();
        let out = generate(&cfg).unwrap();
        assert!(out.events.iter().all(|e| e.kind != EventKind::Transaction));
        assert_eq!(planted_cvr(&cfg, 3), 0.0);
        assert_eq!(oracle_cvr(&cfg), 0.0);
    }

    #[test]
    fn buy_ratio_within_binomial_band() {
        let out = generate(&standard(3)).unwrap();
        let views: usize = out.truth.segments.iter().map(|s| s.views).sum();
        let buys: usize = out.truth.segments.iter().map(|s| s.buys).sum();
        let ratio = buys as f64 / views as f64;
        let sigma = (0.25 / views as f64).sqrt();
        assert!((ratio - 0.5).abs() < 3.0 * sigma, "{buys}/{views}");
    }

    #[test]
    fn buys_are_viewed_and_segments_recovered() {
        let cfg = standard(4);
        let out = generate(&cfg).unwrap();
        let mut viewed: HashMap<(&str, &str), bool> = HashMap::new();
        for e in &out.events {
            if e.kind == EventKind::View {
                viewed.insert((&e.visitor_id, &e.item_id), true);
            }
        }
        for e in out.events.iter().filter(|e| e.kind == EventKind::Transaction) {
            assert!(viewed.contains_key(&(e.visitor_id.as_str(), e.item_id.as_str())));
        }
        let log = EventLog {
            events: out.events.clone(),
            skipped: 0,
        };
        let seg = segment_visitors(&log, &DEFAULT_BIN_EDGES).unwrap();
        assert_eq!(seg.len(), 800);
        for a in seg {
            let g: usize = a.visitor_id.parse::<usize>().unwrap() - 1_000_000;
            assert_eq!(a.segment, depth_segment(4, g / 200));
        }
    }

    #[test]
    fn parses_back_through_ingest() {
        let out = generate(&standard(5)).unwrap();
        let log = crate::ingest::parse_events(out.events_csv().as_bytes()).unwrap();
        assert_eq!(log.events, out.events);
        assert_eq!(log.skipped, 0);
        let cat = crate::ingest::build_catalog(out.catalog_csv().as_bytes()).unwrap();
        assert_eq!(cat, out.catalog);
    }

    #[test]
    fn seeded_determinism() {
        assert_eq!(generate(&standard(6)).unwrap().events_csv(), generate(&standard(6)).unwrap().events_csv());
        assert_ne!(generate(&standard(6)).unwrap().events_csv(), generate(&standard(7)).unwrap().events_csv());
    }

    #[test]
    fn rejects_blocks_that_overflow_their_bin() {
        let mut cfg = standard(1);
        cfg.blocks[0] = vec![0, 1];
        assert!(cfg.validate().is_err());
        cfg.blocks[0] = vec![45];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn planted_rate_matches_simulation() {
        // Several preferred items per category make the rate non-trivial.
        let mut cfg = SynthConfig::new(20, 10, 2, 3000, 0.6, 0.4, 8).unwrap();
        cfg.preferred_per_category = 3;
        cfg.blocks = vec![vec![0, 1], vec![2, 3, 4]];
        cfg.validate().unwrap();
        let out = generate(&cfg).unwrap();
        for s in 0..2 {
            let sets = &out.visitor_sets[s * 3000..(s + 1) * 3000];
            let m = cvr(sets).unwrap();
            let xs: Vec<f64> = sets
                .iter()
                .filter_map(crate::eval::conversion)
                .map(|r| num_traits::ToPrimitive::to_f64(&r).unwrap() * 100.0)
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
            let expect = planted_cvr(&cfg, s);
            assert!((m.percent - mean).abs() < 1e-9);
            assert!(
                (mean - expect).abs() < 3.0 * sd / (xs.len() as f64).sqrt(),
                "segment {s}: {mean} vs {expect}"
            );
        }
        // One preferred item per category converts fully whenever defined.
        assert_eq!(planted_cvr(&standard(1), 2), 100.0);
    }
}
