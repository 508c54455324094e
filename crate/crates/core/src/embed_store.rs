//! Word-vector tables with exact cosine nearest-neighbor queries.
//!
//! The text format is the common GloVe/word2vec layout: an optional
//! `<count> <dim>` header, then one `word f1 f2 ... fdim` row per word.
//! Vectors are stored as `f32`; similarities are computed in `f64`.

use std::collections::HashMap;
use std::io::{self, BufRead};

use thiserror::Error;

use crate::pair_index::NormalizationPolicy;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vector file line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("vector file line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("neighbor count k must be at least 1")]
    InvalidK,

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Something noteworthy but non-fatal found while loading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadWarning {
    DuplicateWord { line: usize, word: String },
    ZeroVector { line: usize, word: String },
    HeaderCount { declared: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborQuery {
    pub word: String,
    pub k: usize,
}

impl NeighborQuery {
    pub fn new(word: impl Into<String>, k: usize) -> Result<Self, EmbedError> {
        if k == 0 {
            return Err(EmbedError::InvalidK);
        }
        Ok(NeighborQuery {
            word: word.into(),
            k,
        })
    }
}

#[derive(Clone, Debug)]
pub struct VectorStore {
    dim: usize,
    vocab: Vec<String>,
    /// Row-major, `vocab.len() * dim` values.
    data: Vec<f32>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
    policy: NormalizationPolicy,
    warnings: Vec<LoadWarning>,
}

impl VectorStore {
    /// A store with no words. Every query returns no neighbors.
    pub fn empty(policy: NormalizationPolicy) -> Self {
        VectorStore {
            dim: 0,
            vocab: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
            index: HashMap::new(),
            policy,
            warnings: Vec::new(),
        }
    }

    pub fn load<R: BufRead>(input: R, policy: NormalizationPolicy) -> Result<Self, EmbedError> {
        let mut store = VectorStore::empty(policy);
        let mut declared = None;
        let mut dim = None;

        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let mut fields = line.split_ascii_whitespace();
            let word = match fields.next() {
                Some(w) => w,
                None => continue,
            };
            let values: Vec<&str> = fields.collect();

            if i == 0 && values.len() == 1 {
                if let (Ok(count), Ok(d)) = (word.parse::<usize>(), values[0].parse::<usize>()) {
                    if d == 0 {
                        return Err(EmbedError::MalformedRow {
                            line: line_no,
                            reason: "header declares dimension 0".into(),
                        });
                    }
                    declared = Some(count);
                    dim = Some(d);
                    continue;
                }
            }

            let expected = *dim.get_or_insert(values.len());
            if expected == 0 {
                return Err(EmbedError::MalformedRow {
                    line: line_no,
                    reason: "row has no vector values".into(),
                });
            }
            if values.len() != expected {
                return Err(EmbedError::DimensionMismatch {
                    line: line_no,
                    expected,
                    found: values.len(),
                });
            }

            let mut row = Vec::with_capacity(expected);
            for v in values {
                let x: f32 = v.parse().map_err(|_| EmbedError::MalformedRow {
                    line: line_no,
                    reason: format!("'{}' is not a number", v),
                })?;
                if !x.is_finite() {
                    return Err(EmbedError::MalformedRow {
                        line: line_no,
                        reason: format!("'{}' is not finite", v),
                    });
                }
                row.push(x);
            }

            store.dim = expected;
            store.push(line_no, word, &row);
        }

        if let Some(declared) = declared {
            if declared != store.vocab.len() + store.duplicate_count() {
                store.warnings.push(LoadWarning::HeaderCount {
                    declared,
                    found: store.vocab.len() + store.duplicate_count(),
                });
            }
        }
        for w in &store.warnings {
            log::warn!("{:?}", w);
        }
        Ok(store)
    }

    /// Builds a store from in-memory rows. Rows must all have the same
    /// length; duplicates follow the first-wins rule of [`VectorStore::load`].
    pub fn from_rows<'a, I>(rows: I, policy: NormalizationPolicy) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (&'a str, &'a [f32])>,
    {
        let mut store = VectorStore::empty(policy);
        for (i, (word, row)) in rows.into_iter().enumerate() {
            if store.vocab.is_empty() && store.dim == 0 {
                store.dim = row.len();
            }
            if row.len() != store.dim || row.is_empty() {
                return Err(EmbedError::DimensionMismatch {
                    line: i + 1,
                    expected: store.dim,
                    found: row.len(),
                });
            }
            store.push(i + 1, word, row);
        }
        Ok(store)
    }

    fn push(&mut self, line: usize, word: &str, row: &[f32]) {
        let word = self.policy.normalize(word).into_owned();
        if self.index.contains_key(&word) {
            self.warnings
                .push(LoadWarning::DuplicateWord { line, word });
            return;
        }
        let norm = row
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            self.warnings.push(LoadWarning::ZeroVector {
                line,
                word: word.clone(),
            });
        }
        self.index.insert(word.clone(), self.vocab.len());
        self.vocab.push(word);
        self.data.extend_from_slice(row);
        self.norms.push(norm);
    }

    fn duplicate_count(&self) -> usize {
        self.warnings
            .iter()
            .filter(|w| matches!(w, LoadWarning::DuplicateWord { .. }))
            .count()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn warnings(&self) -> &[LoadWarning] {
        &self.warnings
    }

    pub fn policy(&self) -> NormalizationPolicy {
        self.policy
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index
            .get(self.policy.normalize(word).as_ref())
            .copied()
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.position(word).map(|i| self.row(i))
    }

    pub fn norm(&self, word: &str) -> Option<f64> {
        self.position(word).map(|i| self.norms[i])
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Cosine similarity between two stored words. Zero vectors have
    /// similarity 0 with everything.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        Some(self.cosine(i, j))
    }

    fn cosine(&self, i: usize, j: usize) -> f64 {
        let denom = self.norms[i] * self.norms[j];
        if denom == 0.0 {
            return 0.0;
        }
        let dot: f64 = self
            .row(i)
            .iter()
            .zip(self.row(j))
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum();
        dot / denom
    }

    /// Exact top-k neighbors by cosine similarity, excluding the query word.
    ///
    /// Unknown words and zero vectors have no neighbors. No similarity
    /// threshold is applied. Equal similarities are ordered by position in
    /// the vector file.
    pub fn top_k_neighbors(&self, query: &NeighborQuery) -> Vec<Neighbor> {
        let q = match self.position(&query.word) {
            Some(q) if self.norms[q] > 0.0 => q,
            _ => return Vec::new(),
        };

        let mut scored: Vec<(f64, usize)> = (0..self.vocab.len())
            .filter(|&j| j != q)
            .map(|j| (self.cosine(q, j), j))
            .collect();

        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let k = query.k.min(scored.len());
        if k == 0 {
            return Vec::new();
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_rank);

        scored
            .into_iter()
            .map(|(similarity, j)| Neighbor {
                word: self.vocab[j].clone(),
                similarity,
            })
            .collect()
    }

    /// Shorthand for [`VectorStore::top_k_neighbors`]; `k == 0` yields nothing.
    pub fn neighbors(&self, word: &str, k: usize) -> Vec<Neighbor> {
        match NeighborQuery::new(word, k) {
            Ok(q) => self.top_k_neighbors(&q),
            Err(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> VectorStore {
        VectorStore::load(text.as_bytes(), NormalizationPolicy::default()).unwrap()
    }

    #[test]
    fn three_words_dim_four() {
        let s = load("3 4\na 1 0 0 0\nb 0 1 0 0\nc 0 0 1 0.5\n");
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 4);
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn headerless() {
        let s = load("a 1 0\nb 0 1\n");
        assert_eq!((s.len(), s.dim()), (2, 2));
    }

    #[test]
    fn duplicate_first_wins() {
        let s = load("a 1 0\nb 0 1\na 0 1\n");
        assert_eq!(s.len(), 2);
        assert_eq!(s.vector("a"), Some(&[1.0f32, 0.0][..]));
        assert_eq!(
            s.warnings(),
            &[LoadWarning::DuplicateWord {
                line: 3,
                word: "a".into()
            }]
        );
    }

    #[test]
    fn duplicate_after_lowercasing() {
        let s = VectorStore::load(&b"Have 1 0\nhave 0 1\n"[..], NormalizationPolicy::new(true))
            .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.vector("HAVE"), Some(&[1.0f32, 0.0][..]));
    }

    #[test]
    fn zero_vector_is_flagged() {
        let s = load("a 0 0\nb 0 1\n");
        assert_eq!(s.len(), 2);
        assert!(matches!(
            s.warnings()[0],
            LoadWarning::ZeroVector { line: 1, .. }
        ));
        assert!(s.neighbors("a", 5).is_empty());
        assert_eq!(s.neighbors("b", 5)[0].similarity, 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let err = VectorStore::load(&b"a 1 0\nb 0 1 1\n"[..], Default::default()).unwrap_err();
        assert!(matches!(
            err,
            EmbedError::DimensionMismatch {
                line: 2,
                expected: 2,
                found: 3
            }
        ));
        let err = VectorStore::load(&b"2 2\na 1 0 3\n"[..], Default::default()).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { line: 2, .. }));
    }

    #[test]
    fn malformed_row() {
        let err = VectorStore::load(&b"a 1 x\n"[..], Default::default()).unwrap_err();
        assert!(matches!(err, EmbedError::MalformedRow { line: 1, .. }));
        let err = VectorStore::load(&b"a 1 0\nb\n"[..], Default::default()).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { line: 2, .. }));
        let err = VectorStore::load(&b"a 1 NaN\n"[..], Default::default()).unwrap_err();
        assert!(matches!(err, EmbedError::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn header_count_mismatch_warns() {
        let s = load("5 2\na 1 0\n");
        assert_eq!(
            s.warnings(),
            &[LoadWarning::HeaderCount {
                declared: 5,
                found: 1
            }]
        );
    }

    #[test]
    fn oov_has_no_neighbors() {
        let s = load("a 1 0\nb 0 1\n");
        assert!(s.neighbors("zzz", 10).is_empty());
    }

    #[test]
    fn no_threshold_and_tie_order() {
        let s = load("a 1 0\nb 1 0\nc 0 1\n");
        let n = s.neighbors("a", 2);
        assert_eq!(
            n,
            vec![
                Neighbor {
                    word: "b".into(),
                    similarity: 1.0
                },
                Neighbor {
                    word: "c".into(),
                    similarity: 0.0
                },
            ]
        );
    }

    #[test]
    fn ties_follow_file_order() {
        let s = load("q 1 0\nz 0 1\ny 0 1\nx 0 1\n");
        let words: Vec<_> = s.neighbors("q", 2).into_iter().map(|n| n.word).collect();
        assert_eq!(words, vec!["z", "y"]);
    }

    #[test]
    fn k_larger_than_vocab() {
        let s = load("a 1 0\nb 0.5 0.5\nc 0 1\n");
        assert_eq!(s.neighbors("a", 10).len(), 2);
        assert!(NeighborQuery::new("a", 0).is_err());
    }

    #[test]
    fn empty_store() {
        let s = VectorStore::empty(Default::default());
        assert!(s.neighbors("a", 10).is_empty());
    }
}
