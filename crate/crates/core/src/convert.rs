//! Relabeling of mismatched arcs in the augment corpus.
//!
//! Conversion is split into planning, which decides a replacement label for
//! every mismatched arc and records why, and [`apply_plan`], which writes
//! those decisions into a copy of the corpus. Only the deprel column of a
//! token is ever changed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Corpus;
use crate::embed_store::{VectorStore, DEFAULT_K};
use crate::mismatch::MismatchSet;
use crate::pair_index::{NormalizationPolicy, PairIndex, PairKey, RelationCounts};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("report does not match corpus at sentence {sentence_index}, token {token_id}")]
    StaleReport {
        sentence_index: usize,
        token_id: usize,
    },

    #[error("strategy {0} requires a vector store")]
    MissingVectors(Strategy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Lexical,
    StaticEmbedding,
    ContextualEmbedding,
}

impl Strategy {
    pub fn uses_embeddings(self) -> bool {
        !matches!(self, Strategy::Lexical)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Lexical => "lexical",
            Strategy::StaticEmbedding => "static-embedding",
            Strategy::ContextualEmbedding => "contextual-embedding",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Strategy::Lexical),
            "static-embedding" | "static" | "glove" => Ok(Strategy::StaticEmbedding),
            "contextual-embedding" | "contextual" | "bert" => Ok(Strategy::ContextualEmbedding),
            _ => Err(format!("unknown strategy '{}'", s)),
        }
    }
}

/// What to do with an arc for which no base evidence exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoReplacement {
    #[default]
    KeepOriginal,
    DropSentence,
}

impl FromStr for NoReplacement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" | "keep-original" => Ok(NoReplacement::KeepOriginal),
            "drop" | "drop-sentence" => Ok(NoReplacement::DropSentence),
            _ => Err(format!("unknown no-replacement policy '{}'", s)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConverterConfig {
    pub strategy: Strategy,
    /// Neighbors per word; embedding strategies only.
    pub k: usize,
    pub policy: NormalizationPolicy,
    pub on_no_replacement: NoReplacement,
}

impl ConverterConfig {
    pub fn new(strategy: Strategy) -> Self {
        ConverterConfig {
            strategy,
            k: DEFAULT_K,
            policy: NormalizationPolicy::default(),
            on_no_replacement: NoReplacement::KeepOriginal,
        }
    }
}

/// A base-corpus (pair, relation, count) that voted for a replacement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub key: PairKey,
    pub relation: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionRecord {
    pub sentence_index: usize,
    pub token_id: usize,
    pub key: PairKey,
    pub old_relation: String,
    pub new_relation: String,
    pub evidence: Vec<Evidence>,
    /// Pooled counts over every candidate pair that survived.
    pub pooled: RelationCounts,
    pub strategy: Strategy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    NoBaseEvidence,
    /// The pooled vote picked the arc's current label.
    AlreadyWinning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedArc {
    pub sentence_index: usize,
    pub token_id: usize,
    pub key: PairKey,
    pub old_relation: String,
    pub reason: SkipReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationChange {
    pub old_relation: String,
    pub new_relation: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub strategy: Strategy,
    pub applied: Vec<ConversionRecord>,
    pub skipped: Vec<SkippedArc>,
    /// Sentences removed under [`NoReplacement::DropSentence`].
    pub dropped_sentences: Vec<usize>,
    pub totals: Vec<RelationChange>,
}

impl ConversionReport {
    fn new(strategy: Strategy) -> Self {
        ConversionReport {
            strategy,
            applied: Vec::new(),
            skipped: Vec::new(),
            dropped_sentences: Vec::new(),
            totals: Vec::new(),
        }
    }

    fn compute_totals(&mut self) {
        let mut totals: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for r in &self.applied {
            *totals
                .entry((r.old_relation.as_str(), r.new_relation.as_str()))
                .or_insert(0) += 1;
        }
        self.totals = totals
            .into_iter()
            .map(|((old, new), count)| RelationChange {
                old_relation: old.to_owned(),
                new_relation: new.to_owned(),
                count,
            })
            .collect();
    }

    /// Number of applied relabelings from `old` to `new`.
    pub fn total(&self, old: &str, new: &str) -> u64 {
        self.totals
            .iter()
            .find(|t| t.old_relation == old && t.new_relation == new)
            .map_or(0, |t| t.count)
    }

    pub fn is_empty(&self) -> bool {
        self.applied.is_empty() && self.skipped.is_empty()
    }

    /// `old_relation \t new_relation \t count`, one row per change.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.totals {
            writeln!(out, "{}\t{}\t{}", t.old_relation, t.new_relation, t.count)?;
        }
        Ok(())
    }
}

/// Outcome of the vote for one mismatched pair.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Decision {
    Replace {
        label: String,
        evidence: Vec<Evidence>,
        pooled: RelationCounts,
    },
    NoEvidence,
}

/// Pools the base counts of `candidates` and picks the most frequent label.
fn vote(base: &PairIndex, candidates: &BTreeSet<PairKey>) -> Decision {
    let mut pooled = RelationCounts::new();
    let mut found = Vec::new();
    for key in candidates {
        if let Some(counts) = base.get(key) {
            pooled.merge(counts);
            found.push((key, counts));
        }
    }

    let label = match pooled.most_frequent() {
        Some((label, _)) => label.to_owned(),
        None => return Decision::NoEvidence,
    };
    let evidence = found
        .into_iter()
        .filter_map(|(key, counts)| {
            let count = counts.get(&label);
            (count > 0).then(|| Evidence {
                key: key.clone(),
                relation: label.clone(),
                count,
            })
        })
        .collect();

    Decision::Replace {
        label,
        evidence,
        pooled,
    }
}

fn decide_lexical(base: &PairIndex, key: &PairKey) -> Decision {
    vote(base, &BTreeSet::from([key.clone()]))
}

/// The word itself followed by its normalized, deduplicated neighbors.
fn expand(word: &str, store: &VectorStore, cfg: &ConverterConfig) -> Vec<String> {
    let mut out = vec![word.to_owned()];
    for n in store.neighbors(word, cfg.k) {
        let w = cfg.policy.normalize(&n.word).into_owned();
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

fn decide_embedding(
    base: &PairIndex,
    store: &VectorStore,
    key: &PairKey,
    cfg: &ConverterConfig,
) -> Decision {
    let heads = expand(&key.head, store, cfg);
    let deps = expand(&key.dep, store, cfg);
    let candidates: BTreeSet<PairKey> = heads
        .iter()
        .flat_map(|h| deps.iter().map(move |d| PairKey::new(h.clone(), d.clone())))
        .collect();
    vote(base, &candidates)
}

/// Decides every mismatched arc of `augment` without touching the corpus.
///
/// `decide` is called once per distinct pair; the decision does not depend
/// on the arc's current label.
fn plan_with<F>(
    augment: &Corpus,
    ms: &MismatchSet,
    cfg: &ConverterConfig,
    mut decide: F,
) -> ConversionReport
where
    F: FnMut(&PairKey) -> Decision,
{
    let mut report = ConversionReport::new(cfg.strategy);
    let mut cache: HashMap<PairKey, Decision> = HashMap::new();

    for (si, sentence) in augment.sentences.iter().enumerate() {
        let mut drop = false;
        for token in &sentence.tokens {
            let head = match sentence.head_form(token) {
                Some(h) => h,
                None => continue,
            };
            let key = cfg.policy.key(head, &token.form);
            if !ms.contains(&key, &token.deprel) {
                continue;
            }

            let decision = cache.entry(key.clone()).or_insert_with_key(|k| decide(k));
            let skip = |reason| SkippedArc {
                sentence_index: si,
                token_id: token.id,
                key: key.clone(),
                old_relation: token.deprel.clone(),
                reason,
            };
            match decision {
                Decision::Replace { label, .. } if *label == token.deprel => {
                    report.skipped.push(skip(SkipReason::AlreadyWinning));
                }
                Decision::Replace {
                    label,
                    evidence,
                    pooled,
                } => report.applied.push(ConversionRecord {
                    sentence_index: si,
                    token_id: token.id,
                    key: key.clone(),
                    old_relation: token.deprel.clone(),
                    new_relation: label.clone(),
                    evidence: evidence.clone(),
                    pooled: pooled.clone(),
                    strategy: cfg.strategy,
                }),
                Decision::NoEvidence => {
                    report.skipped.push(skip(SkipReason::NoBaseEvidence));
                    drop |= cfg.on_no_replacement == NoReplacement::DropSentence;
                }
            }
        }
        if drop {
            report.dropped_sentences.push(si);
        }
    }

    report.compute_totals();
    report
}

/// Plans a lexical conversion: each mismatched arc takes the most frequent
/// base relation of its own pair.
pub fn plan_lexical(
    augment: &Corpus,
    base: &PairIndex,
    ms: &MismatchSet,
    cfg: &ConverterConfig,
) -> ConversionReport {
    let cfg = ConverterConfig {
        strategy: Strategy::Lexical,
        ..*cfg
    };
    plan_with(augment, ms, &cfg, |key| decide_lexical(base, key))
}

/// Plans an embedding conversion: candidate pairs are the product of each
/// word and its top-k neighbors, and the label with the highest pooled base
/// count over all attested candidates wins.
pub fn plan_embedding(
    augment: &Corpus,
    base: &PairIndex,
    ms: &MismatchSet,
    store: &VectorStore,
    cfg: &ConverterConfig,
) -> ConversionReport {
    plan_with(augment, ms, cfg, |key| {
        decide_embedding(base, store, key, cfg)
    })
}

pub fn convert_lexical(
    augment: &Corpus,
    base: &PairIndex,
    ms: &MismatchSet,
    cfg: &ConverterConfig,
) -> (Corpus, ConversionReport) {
    let report = plan_lexical(augment, base, ms, cfg);
    let converted = apply_plan(augment, &report).expect("fresh plan matches its corpus");
    (converted, report)
}

pub fn convert_embedding(
    augment: &Corpus,
    base: &PairIndex,
    ms: &MismatchSet,
    store: &VectorStore,
    cfg: &ConverterConfig,
) -> (Corpus, ConversionReport) {
    let report = plan_embedding(augment, base, ms, store, cfg);
    let converted = apply_plan(augment, &report).expect("fresh plan matches its corpus");
    (converted, report)
}

/// Plans a conversion with the strategy named in `cfg`.
pub fn plan(
    augment: &Corpus,
    base: &PairIndex,
    ms: &MismatchSet,
    store: Option<&VectorStore>,
    cfg: &ConverterConfig,
) -> Result<ConversionReport, ConvertError> {
    match (cfg.strategy, store) {
        (Strategy::Lexical, _) => Ok(plan_lexical(augment, base, ms, cfg)),
        (_, Some(store)) => Ok(plan_embedding(augment, base, ms, store, cfg)),
        (s, None) => Err(ConvertError::MissingVectors(s)),
    }
}

/// Materializes the relabelings of `report` on a copy of `augment`.
pub fn apply_plan(augment: &Corpus, report: &ConversionReport) -> Result<Corpus, ConvertError> {
    let mut out = augment.clone();
    for r in &report.applied {
        let stale = || ConvertError::StaleReport {
            sentence_index: r.sentence_index,
            token_id: r.token_id,
        };
        let token = out
            .sentences
            .get_mut(r.sentence_index)
            .and_then(|s| r.token_id.checked_sub(1).and_then(|i| s.tokens.get_mut(i)))
            .ok_or_else(stale)?;
        if token.deprel != r.old_relation {
            return Err(stale());
        }
        token.deprel = r.new_relation.clone();
    }

    if !report.dropped_sentences.is_empty() {
        let dropped: BTreeSet<usize> = report.dropped_sentences.iter().copied().collect();
        if dropped.iter().any(|&i| i >= out.sentences.len()) {
            return Err(ConvertError::StaleReport {
                sentence_index: *dropped.last().unwrap(),
                token_id: 0,
            });
        }
        out.sentences = out
            .sentences
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, s)| s)
            .collect();
    }

    Ok(out)
}
