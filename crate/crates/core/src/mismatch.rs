//! Annotation differences between a base and an augment corpus.
//!
//! A relation is a mismatch when it occurs with a head–dependent pair in the
//! augment corpus but never with that pair in the base corpus. Pairs missing
//! from the base corpus altogether are mismatches for every relation they
//! carry.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pair_index::{NormalizationPolicy, PairIndex, PairKey};

#[derive(Debug, Error)]
pub enum MismatchError {
    #[error("indexes use different normalization (base {base:?}, augment {augment:?})")]
    PolicyMismatch {
        base: NormalizationPolicy,
        augment: NormalizationPolicy,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub key: PairKey,
    pub augment_relation: String,
    pub augment_count: u64,
    pub base_relations: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MismatchSet {
    /// Sorted by (head, dep, augment_relation).
    pub items: Vec<Mismatch>,
    pub base_source: String,
    pub augment_source: String,
    #[serde(skip)]
    lookup: HashMap<(PairKey, String), usize>,
}

impl MismatchSet {
    pub fn new(items: Vec<Mismatch>, base_source: String, augment_source: String) -> Self {
        let mut items = items;
        items.sort_by(|a, b| (&a.key, &a.augment_relation).cmp(&(&b.key, &b.augment_relation)));
        items.dedup_by(|a, b| a.key == b.key && a.augment_relation == b.augment_relation);
        let lookup = items
            .iter()
            .enumerate()
            .map(|(i, m)| ((m.key.clone(), m.augment_relation.clone()), i))
            .collect();
        MismatchSet {
            items,
            base_source,
            augment_source,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The mismatch for an already-normalized key and relation.
    pub fn get(&self, key: &PairKey, relation: &str) -> Option<&Mismatch> {
        self.lookup
            .get(&(key.clone(), relation.to_owned()))
            .map(|&i| &self.items[i])
    }

    pub fn contains(&self, key: &PairKey, relation: &str) -> bool {
        self.get(key, relation).is_some()
    }

    pub fn summarize(&self) -> MismatchSummary {
        let mut summary = MismatchSummary {
            items: self.items.len(),
            ..Default::default()
        };
        let mut pairs = BTreeSet::new();
        for m in &self.items {
            pairs.insert(&m.key);
            summary.arcs += m.augment_count;
            *summary
                .arcs_by_relation
                .entry(m.augment_relation.clone())
                .or_insert(0) += m.augment_count;
        }
        summary.pairs = pairs.len();
        summary
    }

    /// `head \t dep \t augment_relation \t augment_count \t base_relations`,
    /// with base relations joined by `|`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for m in &self.items {
            let base: Vec<&str> = m.base_relations.iter().map(String::as_str).collect();
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                m.key.head,
                m.key.dep,
                m.augment_relation,
                m.augment_count,
                base.join("|")
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "base_source": self.base_source,
            "augment_source": self.augment_source,
            "summary": self.summarize(),
            "items": self.items,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchSummary {
    /// Distinct head–dependent pairs affected.
    pub pairs: usize,
    /// Distinct (pair, relation) items.
    pub items: usize,
    /// Augment arc occurrences covered by the items.
    pub arcs: u64,
    /// Arc occurrences per augment relation.
    pub arcs_by_relation: BTreeMap<String, u64>,
}

pub fn detect(base: &PairIndex, augment: &PairIndex) -> Result<MismatchSet, MismatchError> {
    if base.policy() != augment.policy() {
        return Err(MismatchError::PolicyMismatch {
            base: base.policy(),
            augment: augment.policy(),
        });
    }

    let mut items = Vec::new();
    for (key, counts) in augment.iter() {
        let base_counts = base.get(key);
        for (rel, count) in counts.iter() {
            if base_counts.is_some_and(|b| b.contains(rel)) {
                continue;
            }
            items.push(Mismatch {
                key: key.clone(),
                augment_relation: rel.to_owned(),
                augment_count: count,
                base_relations: base_counts.map(|b| b.labels()).unwrap_or_default(),
            });
        }
    }

    Ok(MismatchSet::new(
        items,
        base.source().to_owned(),
        augment.source().to_owned(),
    ))
}
