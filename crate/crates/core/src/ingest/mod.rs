//! Clickstream ingestion: event and catalog parsing, click-depth segmentation
//! and per-visitor binary interaction matrices.

mod catalog;
mod events;
mod matrices;
mod segments;

pub use catalog::{build_catalog, Catalog};
pub use events::{parse_events, EventKind, EventLog, RawEvent};
pub use matrices::{
    build_matrices, read_pairs, write_pairs, InteractionMatrixPair, MatrixBuild, Scheme,
    SparseBinary,
};
pub use segments::{
    segment_counts, segment_for_depth, segment_visitors, validate_edges, SegmentAssignment,
    DEFAULT_BIN_EDGES, N_SEGMENTS,
};
