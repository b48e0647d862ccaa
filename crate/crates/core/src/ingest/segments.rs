use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::events::EventLog;
use crate::error::{Error, Result};

pub const N_SEGMENTS: usize = 5;

/// Click-depth bin edges used when none are configured.
pub const DEFAULT_BIN_EDGES: [u64; 4] = [2, 4, 8, 16];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentAssignment {
    pub visitor_id: String,
    pub click_depth: u64,
    pub segment: usize,
}

/// Index of the first edge exceeding `depth`, or 4 when none does.
pub fn segment_for_depth(depth: u64, edges: &[u64; 4]) -> usize {
    edges.iter().position(|&e| e > depth).unwrap_or(N_SEGMENTS - 1)
}

pub fn validate_edges(edges: &[u64; 4]) -> Result<()> {
    if edges.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "click-depth bin edges must be strictly ascending, got {edges:?}"
        )))
    }
}

/// Assigns every visitor to a click-depth segment. Output is sorted by visitor id.
pub fn segment_visitors(events: &EventLog, edges: &[u64; 4]) -> Result<Vec<SegmentAssignment>> {
    validate_edges(edges)?;
    let mut depth: BTreeMap<&str, u64> = BTreeMap::new();
    for ev in &events.events {
        *depth.entry(ev.visitor_id.as_str()).or_default() += 1;
    }
    Ok(depth
        .into_iter()
        .map(|(v, d)| SegmentAssignment {
            visitor_id: v.to_string(),
            click_depth: d,
            segment: segment_for_depth(d, edges),
        })
        .collect())
}

pub fn segment_counts(assignments: &[SegmentAssignment]) -> [usize; N_SEGMENTS] {
    let mut counts = [0; N_SEGMENTS];
    for a in assignments {
        counts[a.segment] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::events::{EventKind, RawEvent};

    #[test]
    fn bins_at_the_extremes() {
        let e = DEFAULT_BIN_EDGES;
        assert_eq!(segment_for_depth(1, &e), 0);
        assert_eq!(segment_for_depth(100, &e), 4);
        assert_eq!(segment_for_depth(2, &e), 1);
        assert_eq!(segment_for_depth(15, &e), 3);
        assert_eq!(segment_for_depth(16, &e), 4);
    }

    #[test]
    fn non_ascending_edges_rejected() {
        let log = EventLog::default();
        assert!(matches!(
            segment_visitors(&log, &[2, 2, 8, 16]),
            Err(Error::Config(_))
        ));
        assert!(segment_visitors(&log, &[9, 4, 8, 16]).is_err());
    }

    #[test]
    fn partition_and_monotonicity() {
        let mut events = Vec::new();
        for v in 0..30u64 {
            for t in 0..(v % 20 + 1) {
                events.push(RawEvent::new(t, &format!("v{v}"), EventKind::View, "i"));
            }
        }
        let log = EventLog { events, skipped: 0 };
        let a = segment_visitors(&log, &DEFAULT_BIN_EDGES).unwrap();
        assert_eq!(a.len(), 30);
        assert_eq!(segment_counts(&a).iter().sum::<usize>(), 30);
        let mut by_depth = a.clone();
        by_depth.sort_by_key(|s| s.click_depth);
        assert!(by_depth.windows(2).all(|w| w[0].segment <= w[1].segment));
    }
}
