use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Item → category hierarchy with a canonical bit position for every item.
///
/// Categories are ordered lexicographically by id and so are the items within a
/// category; that order is the row order of the coded matrices and the bit
/// order inside each row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog {
    categories: Vec<String>,
    items: Vec<Vec<String>>,
    index: HashMap<String, (usize, usize)>,
}

impl Catalog {
    /// Builds a catalog from `(item_id, category_id)` pairs. Exact duplicate pairs
    /// are tolerated; an item under two different categories is an error.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut owner: HashMap<String, String> = HashMap::new();
        let mut grouped: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (item, cat) in pairs {
            let item = item.into();
            let cat = cat.into();
            if item.is_empty() || cat.is_empty() {
                return Err(Error::Validation("empty item or category id".into()));
            }
            if let Some(prev) = owner.get(&item) {
                if *prev != cat {
                    return Err(Error::Validation(format!(
                        "item {item} listed under categories {prev} and {cat}"
                    )));
                }
                continue;
            }
            owner.insert(item.clone(), cat.clone());
            grouped.entry(cat).or_default().insert(item);
        }

        let mut categories = Vec::with_capacity(grouped.len());
        let mut items = Vec::with_capacity(grouped.len());
        let mut index = HashMap::with_capacity(owner.len());
        for (c, (cat, members)) in grouped.into_iter().enumerate() {
            let members: Vec<String> = members.into_iter().collect();
            for (pos, it) in members.iter().enumerate() {
                index.insert(it.clone(), (c, pos));
            }
            categories.push(cat);
            items.push(members);
        }
        Ok(Catalog {
            categories,
            items,
            index,
        })
    }

    /// Number of categories, `r`.
    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn category_id(&self, cat: usize) -> &str {
        &self.categories[cat]
    }

    pub fn category_ids(&self) -> &[String] {
        &self.categories
    }

    pub fn items_in(&self, cat: usize) -> &[String] {
        &self.items[cat]
    }

    pub fn item_id(&self, cat: usize, pos: usize) -> &str {
        &self.items[cat][pos]
    }

    /// `n_c` for category `cat`.
    pub fn category_len(&self, cat: usize) -> usize {
        self.items[cat].len()
    }

    pub fn category_lens(&self) -> Vec<usize> {
        self.items.iter().map(Vec::len).collect()
    }

    pub fn total_items(&self) -> usize {
        self.index.len()
    }

    /// `(category index, bit position)` of an item.
    pub fn locate(&self, item: &str) -> Option<(usize, usize)> {
        self.index.get(item).copied()
    }

    /// Canonical `item_id,category_id` listing in (category, position) order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_id,category_id\n");
        for (cat, members) in self.categories.iter().zip(&self.items) {
            for it in members {
                out.push_str(it);
                out.push(',');
                out.push_str(cat);
                out.push('\n');
            }
        }
        out
    }

    /// Stable 64-bit fingerprint of the canonical listing (first 8 bytes of
    /// SHA-256, little-endian).
    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.to_csv().as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }
}

fn is_header(fields: &[&str]) -> bool {
    let lead = fields[0].to_ascii_lowercase();
    lead.parse::<f64>().is_err() && matches!(lead.as_str(), "item_id" | "itemid" | "item")
}

/// Reads an `item_id,category_id` stream into a [`Catalog`].
pub fn build_catalog<R: BufRead>(reader: R) -> Result<Catalog> {
    let mut pairs = Vec::new();
    let mut first = true;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if first {
            first = false;
            if is_header(&fields) {
                continue;
            }
        }
        if fields.len() != 2 {
            return Err(Error::Validation(format!(
                "catalog line {}: expected `item_id,category_id`, got {trimmed:?}",
                lineno + 1
            )));
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Catalog::from_pairs(pairs)
}
