//! Conversion rate, category similarity, matched-density null trials and the
//! summary report.

pub mod metrics;
pub mod null;
pub mod report;

pub use metrics::{
    category_similarity, conversion, cvr, cvr_exact, density, jaccard, jaccard_exact, mean_counts, ExactMean,
    MetricValue,
};
pub use null::{items_for_density, null_sets, null_trials, NullMetric, NullResult};
pub use report::{
    evaluate_segment, metrics_row, null_seed, report, Benchmark, MetricsReport, SegmentRow, INDUSTRY_CVR, PRODUCT_CVR,
};
