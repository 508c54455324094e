//! Index from head–dependent word pairs to the relations they occur with.

use std::borrow::Cow;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Corpus;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index dump line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How word forms are normalized before they are used as keys.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub lowercase: bool,
}

impl NormalizationPolicy {
    pub fn new(lowercase: bool) -> Self {
        NormalizationPolicy { lowercase }
    }

    pub fn normalize<'a>(&self, form: &'a str) -> Cow<'a, str> {
        if self.lowercase && form.chars().any(char::is_uppercase) {
            Cow::Owned(form.to_lowercase())
        } else {
            Cow::Borrowed(form)
        }
    }

    pub fn key(&self, head: &str, dep: &str) -> PairKey {
        PairKey::new(self.normalize(head), self.normalize(dep))
    }
}

/// A (head form, dependent form) pair. Ordered by head, then dependent.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub head: String,
    pub dep: String,
}

impl PairKey {
    pub fn new(head: impl Into<String>, dep: impl Into<String>) -> Self {
        PairKey {
            head: head.into(),
            dep: dep.into(),
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.head, self.dep)
    }
}

/// Multiset of relation labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationCounts(BTreeMap<String, u64>);

impl RelationCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, relation: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self.0.entry(relation.to_owned()).or_insert(0) += count;
    }

    pub fn get(&self, relation: &str) -> u64 {
        self.0.get(relation).copied().unwrap_or(0)
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.0.contains_key(relation)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Labels with their counts, in label order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(r, &c)| (r.as_str(), c))
    }

    pub fn labels(&self) -> BTreeSet<String> {
        self.0.keys().cloned().collect()
    }

    /// The label with the highest count. Ties go to the lexicographically
    /// smallest label.
    pub fn most_frequent(&self) -> Option<(&str, u64)> {
        // Iteration is in ascending label order, so a strict comparison keeps
        // the first (smallest) label among equals.
        let mut best: Option<(&str, u64)> = None;
        for (rel, count) in self.iter() {
            match best {
                Some((_, c)) if c >= count => {}
                _ => best = Some((rel, count)),
            }
        }
        best
    }

    pub fn merge(&mut self, other: &RelationCounts) {
        for (rel, count) in other.iter() {
            self.add(rel, count);
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for RelationCounts {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut counts = RelationCounts::new();
        for (rel, count) in iter {
            counts.add(&rel.into(), count);
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairIndex {
    entries: BTreeMap<PairKey, RelationCounts>,
    policy: NormalizationPolicy,
    source: String,
}

impl PairIndex {
    pub fn new(policy: NormalizationPolicy, source: impl Into<String>) -> Self {
        PairIndex {
            entries: BTreeMap::new(),
            policy,
            source: source.into(),
        }
    }

    /// Indexes every non-root arc of `corpus` by (head form, dependent form).
    pub fn build(corpus: &Corpus, policy: NormalizationPolicy) -> Self {
        let mut index = PairIndex::new(policy, corpus.source.clone());
        for sentence in &corpus.sentences {
            for token in &sentence.tokens {
                if let Some(head) = sentence.head_form(token) {
                    index.add(head, &token.form, &token.deprel, 1);
                }
            }
        }
        index
    }

    /// Adds `count` occurrences of `relation` for the normalized pair.
    pub fn add(&mut self, head: &str, dep: &str, relation: &str, count: u64) {
        if count == 0 {
            return;
        }
        let key = self.policy.key(head, dep);
        self.entries.entry(key).or_default().add(relation, count);
    }

    /// Merges another index built with the same policy.
    pub fn merge(&mut self, other: &PairIndex) {
        debug_assert_eq!(self.policy, other.policy);
        for (key, counts) in &other.entries {
            match self.entries.entry(key.clone()) {
                Entry::Vacant(v) => {
                    v.insert(counts.clone());
                }
                Entry::Occupied(mut o) => o.get_mut().merge(counts),
            }
        }
    }

    pub fn policy(&self) -> NormalizationPolicy {
        self.policy
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_arcs(&self) -> u64 {
        self.entries.values().map(RelationCounts::total).sum()
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &RelationCounts)> {
        self.entries.iter()
    }

    /// Looks up a key after applying this index's normalization to it.
    pub fn get(&self, key: &PairKey) -> Option<&RelationCounts> {
        let p = self.policy;
        match (p.normalize(&key.head), p.normalize(&key.dep)) {
            (Cow::Borrowed(_), Cow::Borrowed(_)) => self.entries.get(key),
            (h, d) => self.entries.get(&PairKey::new(h, d)),
        }
    }

    pub fn contains_key(&self, key: &PairKey) -> bool {
        self.get(key).is_some()
    }

    pub fn most_frequent_relation(&self, key: &PairKey) -> Option<(String, u64)> {
        self.get(key)
            .and_then(RelationCounts::most_frequent)
            .map(|(r, c)| (r.to_owned(), c))
    }

    pub fn relations_of(&self, key: &PairKey) -> BTreeSet<String> {
        self.get(key)
            .map(RelationCounts::labels)
            .unwrap_or_default()
    }

    /// Writes `head \t dep \t relation \t count` rows, sorted.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (key, counts) in &self.entries {
            for (rel, count) in counts.iter() {
                writeln!(out, "{}\t{}\t{}\t{}", key.head, key.dep, rel, count)?;
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(
        input: R,
        policy: NormalizationPolicy,
        source: impl Into<String>,
    ) -> Result<Self, IndexError> {
        let mut index = PairIndex::new(policy, source);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| IndexError::MalformedRow {
                line: i + 1,
                reason: reason.to_owned(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 tab-separated columns"));
            }
            if cols[..3].iter().any(|c| c.is_empty()) {
                return Err(bad("empty field"));
            }
            let count: u64 = cols[3]
                .parse()
                .map_err(|_| bad("count is not an integer"))?;
            if count == 0 {
                return Err(bad("count must be positive"));
            }
            index.add(cols[0], cols[1], cols[2], count);
        }
        Ok(index)
    }
}

pub fn build_index(corpus: &Corpus, policy: NormalizationPolicy) -> PairIndex {
    PairIndex::build(corpus, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_corpus, ParseOptions};

    fn corpus(text: &str) -> Corpus {
        parse_corpus(text.as_bytes(), "t", ParseOptions::default()).unwrap()
    }

    #[test]
    fn such_as_fixed_35() {
        let sentence = "1\tsuch\tsuch\tADJ\tJJ\t_\t0\troot\t_\t_\n\
                        2\tas\tas\tADP\tIN\t_\t1\tfixed\t_\t_\n\n";
        let c = corpus(&sentence.repeat(35));
        let idx = build_index(&c, NormalizationPolicy::default());
        assert_eq!(idx.len(), 1);
        let key = PairKey::new("such", "as");
        assert_eq!(
            idx.most_frequent_relation(&key),
            Some(("fixed".to_owned(), 35))
        );
        assert_eq!(idx.total_arcs(), 35);
        assert_eq!(idx.total_arcs() as usize, c.arc_count());
    }

    #[test]
    fn empty_corpus_empty_index() {
        let idx = build_index(&Corpus::new("e"), NormalizationPolicy::default());
        assert!(idx.is_empty());
        assert_eq!(idx.total_arcs(), 0);
    }

    #[test]
    fn absent_key() {
        let idx = PairIndex::new(NormalizationPolicy::default(), "x");
        let key = PairKey::new("a", "b");
        assert_eq!(idx.most_frequent_relation(&key), None);
        assert!(idx.relations_of(&key).is_empty());
    }

    #[test]
    fn tie_breaks_lexicographically() {
        let mut idx = PairIndex::new(NormalizationPolicy::default(), "x");
        idx.add("h", "d", "b", 3);
        idx.add("h", "d", "a", 3);
        assert_eq!(
            idx.most_frequent_relation(&PairKey::new("h", "d")),
            Some(("a".to_owned(), 3))
        );
    }

    #[test]
    fn subtypes_are_distinct() {
        let mut idx = PairIndex::new(NormalizationPolicy::default(), "x");
        idx.add("h", "d", "nsubj", 1);
        idx.add("h", "d", "nsubj:pass", 2);
        assert_eq!(idx.relations_of(&PairKey::new("h", "d")).len(), 2);
    }

    #[test]
    fn lowercase_applies_to_queries() {
        let mut idx = PairIndex::new(NormalizationPolicy::new(true), "x");
        idx.add("Have", "N'T", "dep", 9);
        let want: BTreeSet<String> = ["dep".to_owned()].into();
        assert_eq!(idx.relations_of(&PairKey::new("have", "n't")), want);
        assert_eq!(idx.relations_of(&PairKey::new("HAVE", "n'T")), want);

        let cs = PairIndex::new(NormalizationPolicy::default(), "x");
        assert!(cs.relations_of(&PairKey::new("have", "n't")).is_empty());
    }

    #[test]
    fn case_sensitive_by_default() {
        let mut idx = PairIndex::new(NormalizationPolicy::default(), "x");
        idx.add("Have", "n't", "dep", 1);
        assert!(idx.get(&PairKey::new("have", "n't")).is_none());
    }

    #[test]
    fn tsv_dump_round_trip() {
        let mut idx = PairIndex::new(NormalizationPolicy::default(), "x");
        idx.add("have", "n't", "dep", 9);
        idx.add("has", "n't", "neg", 5);
        idx.add("would", "n't", "neg", 5);
        let mut buf = Vec::new();
        idx.write_tsv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "has\tn't\tneg\t5\nhave\tn't\tdep\t9\nwould\tn't\tneg\t5\n"
        );
        let back = PairIndex::read_tsv(&buf[..], NormalizationPolicy::default(), "x").unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn tsv_load_rejects_bad_count() {
        let err = PairIndex::read_tsv(&b"a\tb\tdep\tzero\n"[..], Default::default(), "x");
        assert!(matches!(err, Err(IndexError::MalformedRow { line: 1, .. })));
    }
}
