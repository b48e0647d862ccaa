use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::catalog::Catalog;
use super::events::{EventKind, EventLog};
use super::segments::SegmentAssignment;
use crate::error::{Error, Result};

/// Ordered behavior pair whose joint distribution is modeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    ViewAdd,
    AddBuy,
    #[default]
    ViewBuy,
}

impl Scheme {
    pub fn kinds(self) -> (EventKind, EventKind) {
        match self {
            Scheme::ViewAdd => (EventKind::View, EventKind::AddToCart),
            Scheme::AddBuy => (EventKind::AddToCart, EventKind::Transaction),
            Scheme::ViewBuy => (EventKind::View, EventKind::Transaction),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ViewAdd => "view,add",
            Scheme::AddBuy => "add,buy",
            Scheme::ViewBuy => "view,buy",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_matches(|c| c == '(' || c == ')') {
            "view,add" | "view-add" | "view_add" => Ok(Scheme::ViewAdd),
            "add,buy" | "add-buy" | "add_buy" => Ok(Scheme::AddBuy),
            "view,buy" | "view-buy" | "view_buy" => Ok(Scheme::ViewBuy),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Sparse binary matrix over (category, category-local item position).
pub type SparseBinary = BTreeSet<(usize, usize)>;

/// Paired indicator matrices for one visitor. Under the (view,buy) scheme
/// `first` is the view matrix V and `second` the buy matrix B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionMatrixPair {
    pub visitor_id: String,
    pub segment: usize,
    pub first: SparseBinary,
    pub second: SparseBinary,
}

impl InteractionMatrixPair {
    /// Dense 0/1 row of length `n` for category `cat` of one channel.
    pub fn dense_row(m: &SparseBinary, cat: usize, n: usize) -> Vec<u8> {
        let mut row = vec![0u8; n];
        for &(_, pos) in m.range((cat, 0)..(cat + 1, 0)) {
            row[pos] = 1;
        }
        row
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatrixBuild {
    pub pairs: Vec<InteractionMatrixPair>,
    /// Scheme-relevant events whose item is missing from the catalog.
    pub skipped_unknown: usize,
}

/// Builds one matrix pair per visitor having at least one event of each behavior
/// in `scheme`. Pairs are ordered by visitor id.
pub fn build_matrices(
    events: &EventLog,
    catalog: &Catalog,
    scheme: Scheme,
    assignments: &[SegmentAssignment],
) -> Result<MatrixBuild> {
    let (k1, k2) = scheme.kinds();
    let segment_of: HashMap<&str, usize> = assignments
        .iter()
        .map(|a| (a.visitor_id.as_str(), a.segment))
        .collect();

    let mut per_visitor: BTreeMap<&str, (SparseBinary, SparseBinary)> = BTreeMap::new();
    let mut skipped_unknown = 0;
    for ev in &events.events {
        if ev.kind != k1 && ev.kind != k2 {
            continue;
        }
        let Some(cell) = catalog.locate(&ev.item_id) else {
            skipped_unknown += 1;
            continue;
        };
        let entry = per_visitor.entry(ev.visitor_id.as_str()).or_default();
        if ev.kind == k1 {
            entry.0.insert(cell);
        } else {
            entry.1.insert(cell);
        }
    }

    let mut pairs = Vec::new();
    for (visitor, (first, second)) in per_visitor {
        if first.is_empty() || second.is_empty() {
            continue;
        }
        let segment = *segment_of.get(visitor).ok_or_else(|| {
            Error::Validation(format!("visitor {visitor} has no segment assignment"))
        })?;
        pairs.push(InteractionMatrixPair {
            visitor_id: visitor.to_string(),
            segment,
            first,
            second,
        });
    }
    Ok(MatrixBuild {
        pairs,
        skipped_unknown,
    })
}

/// Writes pairs as `visitor<TAB>segment<TAB>first cells<TAB>second cells`, cells as
/// `cat:pos` separated by spaces.
pub fn write_pairs<W: Write>(mut out: W, pairs: &[InteractionMatrixPair]) -> Result<()> {
    fn cells(m: &SparseBinary) -> String {
        m.iter()
            .map(|(c, p)| format!("{c}:{p}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
    for p in pairs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.visitor_id,
            p.segment,
            cells(&p.first),
            cells(&p.second)
        )?;
    }
    Ok(())
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<InteractionMatrixPair>> {
    fn cells(s: &str, lineno: usize) -> Result<SparseBinary> {
        s.split_whitespace()
            .map(|tok| {
                let (c, p) = tok.split_once(':').ok_or_else(|| bad(lineno))?;
                Ok((
                    c.parse().map_err(|_| bad(lineno))?,
                    p.parse().map_err(|_| bad(lineno))?,
                ))
            })
            .collect()
    }
    fn bad(lineno: usize) -> Error {
        Error::Format(format!("interaction file line {lineno}: malformed record"))
    }

    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(i + 1));
        }
        pairs.push(InteractionMatrixPair {
            visitor_id: f[0].to_string(),
            segment: f[1].parse().map_err(|_| bad(i + 1))?,
            first: cells(f[2], i + 1)?,
            second: cells(f[3], i + 1)?,
        });
    }
    Ok(pairs)
}
