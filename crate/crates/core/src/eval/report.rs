use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{cvr, density, jaccard, mean_counts};
use super::null::{null_trials, NullResult};
use crate::ingest::Catalog;
use crate::recgen::RecommendationSet;
use crate::{Error, Result};

/// Average e-commerce conversion rate over 11 industrial markets, in percent.
pub const INDUSTRY_CVR: f64 = 2.089;
pub const INDUSTRY_SOURCE: &str = "average over 11 industrial markets (2020 survey)";
/// Average e-commerce conversion rate over 9 product types, in percent.
pub const PRODUCT_CVR: f64 = 1.827;
pub const PRODUCT_SOURCE: &str = "average over 9 product types (2020 survey)";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub segment: usize,
    pub realizations: usize,
    pub mean_items: f64,
    pub mean_categories: f64,
    pub cvr: f64,
    pub cvr_rn: f64,
    pub jc: f64,
    pub jc_rn: f64,
    pub density_view: f64,
    pub density_buy: f64,
    pub null_trials: usize,
    pub cvr_skipped: usize,
    pub jc_skipped: usize,
    pub cvr_undefined: bool,
    pub jc_undefined: bool,
    pub null_cvr_skipped: usize,
    pub null_jc_skipped: usize,
    pub null_cvr_undefined: bool,
    pub null_jc_undefined: bool,
}

impl SegmentRow {
    /// Row from summary values alone, e.g. previously published figures.
    #[allow(clippy::too_many_arguments)]
    pub fn summary(
        segment: usize,
        realizations: usize,
        mean_items: f64,
        mean_categories: f64,
        cvr: f64,
        cvr_rn: f64,
        jc: f64,
        jc_rn: f64,
    ) -> Self {
        SegmentRow {
            segment,
            realizations,
            mean_items,
            mean_categories,
            cvr,
            cvr_rn,
            jc,
            jc_rn,
            ..SegmentRow::default()
        }
    }
}

fn metric_or_flag(r: Result<super::metrics::MetricValue>, n: usize) -> Result<(f64, usize, bool)> {
    match r {
        Ok(m) => Ok((m.percent, m.skipped, false)),
        Err(Error::UndefinedMetric { .. }) => Ok((0.0, n, true)),
        Err(e) => Err(e),
    }
}

/// Seed of the null trials for one segment.
pub fn null_seed(seed: u64, segment: usize) -> u64 {
    seed ^ (segment as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Metrics of one segment's realizations, without null trials. Undefined
/// metrics are reported as 0 and flagged.
pub fn metrics_row(segment: usize, sets: &[RecommendationSet], catalog: &Catalog) -> Result<SegmentRow> {
    if sets.is_empty() {
        return Err(Error::Validation(format!("segment {segment} has no realizations")));
    }
    let n = sets.len();
    let (cvr_v, cvr_skipped, cvr_undefined) = metric_or_flag(cvr(sets), n)?;
    let (jc_v, jc_skipped, jc_undefined) = metric_or_flag(jaccard(sets), n)?;
    let (density_view, density_buy) = density(sets, catalog);
    let (mean_items, mean_categories) = mean_counts(sets);
    Ok(SegmentRow {
        segment,
        realizations: n,
        mean_items,
        mean_categories,
        cvr: cvr_v,
        jc: jc_v,
        density_view,
        density_buy,
        cvr_skipped,
        jc_skipped,
        cvr_undefined,
        jc_undefined,
        ..SegmentRow::default()
    })
}

impl SegmentRow {
    pub fn with_null(mut self, null: &NullResult) -> Self {
        self.cvr_rn = null.cvr.percent;
        self.jc_rn = null.jaccard.percent;
        self.null_trials = null.trials;
        self.null_cvr_skipped = null.cvr.skipped;
        self.null_jc_skipped = null.jaccard.skipped;
        self.null_cvr_undefined = null.cvr.all_skipped;
        self.null_jc_undefined = null.jaccard.all_skipped;
        self
    }
}

/// Metrics for one segment's realizations together with their matched-density
/// null trials.
pub fn evaluate_segment(
    segment: usize,
    sets: &[RecommendationSet],
    catalog: &Catalog,
    n_trials: usize,
    seed: u64,
) -> Result<SegmentRow> {
    let row = metrics_row(segment, sets, catalog)?;
    let null = null_trials(row.density_view, row.density_buy, catalog, n_trials, null_seed(seed, segment))?;
    Ok(row.with_null(&null))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    /// Mean CVR over segments whose CVR is defined.
    pub gan_mean_cvr: f64,
    pub segments: usize,
    pub industry_cvr: f64,
    pub industry_source: String,
    pub product_cvr: f64,
    pub product_source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<SegmentRow>,
    pub benchmark: Benchmark,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Segment(SegmentRow),
    Benchmark(Benchmark),
}

pub fn report(mut rows: Vec<SegmentRow>) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::Validation("report needs at least one segment".into()));
    }
    rows.sort_by_key(|r| r.segment);
    let defined: Vec<f64> = rows.iter().filter(|r| !r.cvr_undefined).map(|r| r.cvr).collect();
    let gan_mean_cvr = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(MetricsReport {
        benchmark: Benchmark {
            gan_mean_cvr,
            segments: defined.len(),
            industry_cvr: INDUSTRY_CVR,
            industry_source: INDUSTRY_SOURCE.into(),
            product_cvr: PRODUCT_CVR,
            product_source: PRODUCT_SOURCE.into(),
        },
        rows,
    })
}

impl MetricsReport {
    /// One JSON object per line: the segment rows, then the benchmark.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let records = self
            .rows
            .iter()
            .cloned()
            .map(Record::Segment)
            .chain(std::iter::once(Record::Benchmark(self.benchmark.clone())));
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("report records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut benchmark = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("report line {}: {e}", i + 1)))?;
            match rec {
                Record::Segment(r) => rows.push(r),
                Record::Benchmark(b) => benchmark = Some(b),
            }
        }
        let benchmark = benchmark.ok_or_else(|| Error::Format("report has no benchmark record".into()))?;
        Ok(MetricsReport { rows, benchmark })
    }

    /// Aligned plain-text table followed by the benchmark line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let na = |undefined: bool, s: String| if undefined { "n/a".to_string() } else { s };
        writeln!(
            out,
            "{:>3} {:>8} {:>6} {:>8} {:>8} {:>7} {:>7} {:>6}",
            "y", "#I", "#C", "CVR", "CVR_rn", "J_c", "J_c_rn", "N"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:>3} {:>8.0} {:>6.0} {:>8} {:>8} {:>7} {:>7} {:>6}",
                r.segment,
                r.mean_items,
                r.mean_categories,
                na(r.cvr_undefined, format!("{:.3}", r.cvr)),
                na(r.null_cvr_undefined, format!("{:.4}", r.cvr_rn)),
                na(r.jc_undefined, format!("{:.2}", r.jc)),
                na(r.null_jc_undefined, format!("{:.2}", r.jc_rn)),
                r.realizations
            )
            .unwrap();
        }
        let b = &self.benchmark;
        writeln!(
            out,
            "CVR (%): GAN {:.3} | Industry {:.3} | Product {:.3}",
            b.gan_mean_cvr, b.industry_cvr, b.product_cvr
        )
        .unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn published() -> Vec<SegmentRow> {
        vec![
            SegmentRow::summary(1, 200, 1648.0, 239.0, 1.763, 0.0005, 8.19, 50.66),
            SegmentRow::summary(2, 200, 2037.0, 213.0, 1.414, 0.0004, 7.37, 51.36),
            SegmentRow::summary(3, 200, 2522.0, 190.0, 1.323, 0.0005, 6.13, 50.04),
            SegmentRow::summary(4, 200, 1419.0, 222.0, 1.644, 0.0004, 7.57, 50.81),
        ]
    }

    const GOLDEN: &str = "  y       #I     #C      CVR   CVR_rn     J_c  J_c_rn      N
  1     1648    239    1.763   0.0005    8.19   50.66    200
  2     2037    213    1.414   0.0004    7.37   51.36    200
  3     2522    190    1.323   0.0005    6.13   50.04    200
  4     1419    222    1.644   0.0004    7.57   50.81    200
CVR (%): GAN 1.536 | Industry 2.089 | Product 1.827
";

    #[test]
    fn golden_table() {
        let r = report(published()).unwrap();
        assert_eq!(format!("{:.3}", r.benchmark.gan_mean_cvr), "1.536");
        assert_eq!(r.to_text(), GOLDEN);
    }

    #[test]
    fn rendering_is_stable_and_round_trips() {
        let mut rows = published();
        rows.reverse();
        let a = report(rows).unwrap();
        let b = report(published()).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(MetricsReport::from_jsonl(&a.to_jsonl()).unwrap(), a);
        assert_eq!(a.to_jsonl().lines().count(), 5);
    }

    #[test]
    fn single_segment_mean() {
        let r = report(vec![SegmentRow::summary(2, 10, 1.0, 1.0, 4.25, 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(r.benchmark.gan_mean_cvr, 4.25);
    }

    #[test]
    fn undefined_segments_are_excluded_from_the_mean() {
        let mut rows = published();
        rows[0].cvr_undefined = true;
        rows[0].cvr = 0.0;
        let r = report(rows).unwrap();
        assert_eq!(r.benchmark.segments, 3);
        assert!((r.benchmark.gan_mean_cvr - (1.414 + 1.323 + 1.644) / 3.0).abs() < 1e-12);
        assert!(r.to_text().lines().nth(1).unwrap().contains("n/a"));
    }
}
