//! Attachment scores, significance testing and error analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Corpus, Token};
use crate::pair_index::RelationCounts;
use crate::rng::SeededRng;

/// Name under which the significance test is reported.
pub const SIGNIFICANCE_TEST: &str = "paired-bootstrap (artifact choice)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("alignment failed at sentence {sentence}: {reason}")]
    Alignment { sentence: usize, reason: String },

    #[error("invalid significance config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Skip tokens whose gold relation is `punct`.
    pub exclude_punct: bool,
}

impl ScoreOptions {
    fn counts(&self, gold: &Token) -> bool {
        !(self.exclude_punct && gold.deprel == "punct")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceTally {
    pub correct_heads: usize,
    pub correct_labeled: usize,
    pub tokens: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub uas: f64,
    pub las: f64,
    pub counted_tokens: usize,
    pub per_sentence: Vec<SentenceTally>,
}

impl ScoreResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "uas": self.uas,
            "las": self.las,
            "tokens": self.counted_tokens,
        })
    }
}

impl fmt::Display for ScoreResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UAS {:.2} LAS {:.2} ({} tokens)",
            self.uas, self.las, self.counted_tokens
        )
    }
}

/// Checks that `pred` has the same sentences, token counts and forms as
/// `gold`.
pub fn align(gold: &Corpus, pred: &Corpus) -> Result<(), EvalError> {
    if gold.sentences.len() != pred.sentences.len() {
        return Err(EvalError::Alignment {
            sentence: gold.sentences.len().min(pred.sentences.len()),
            reason: format!(
                "gold has {} sentences, prediction has {}",
                gold.sentences.len(),
                pred.sentences.len()
            ),
        });
    }
    for (i, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.tokens.len() != p.tokens.len() {
            return Err(EvalError::Alignment {
                sentence: i,
                reason: format!(
                    "gold has {} tokens, prediction has {}",
                    g.tokens.len(),
                    p.tokens.len()
                ),
            });
        }
        if let Some((gt, pt)) = g
            .tokens
            .iter()
            .zip(&p.tokens)
            .find(|(a, b)| a.form != b.form)
        {
            return Err(EvalError::Alignment {
                sentence: i,
                reason: format!(
                    "token {} is '{}' in gold but '{}' in prediction",
                    gt.id, gt.form, pt.form
                ),
            });
        }
    }
    Ok(())
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

pub fn score(gold: &Corpus, pred: &Corpus) -> Result<ScoreResult, EvalError> {
    score_with(gold, pred, ScoreOptions::default())
}

/// UAS and LAS over all syntactic words, root attachments included.
pub fn score_with(
    gold: &Corpus,
    pred: &Corpus,
    opts: ScoreOptions,
) -> Result<ScoreResult, EvalError> {
    align(gold, pred)?;

    let per_sentence: Vec<SentenceTally> = gold
        .sentences
        .iter()
        .zip(&pred.sentences)
        .map(|(g, p)| {
            let mut t = SentenceTally::default();
            for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
                if !opts.counts(gt) {
                    continue;
                }
                t.tokens += 1;
                if gt.head == pt.head {
                    t.correct_heads += 1;
                    if gt.deprel == pt.deprel {
                        t.correct_labeled += 1;
                    }
                }
            }
            t
        })
        .collect();

    let n = per_sentence.iter().map(|t| t.tokens).sum();
    let heads = per_sentence.iter().map(|t| t.correct_heads).sum();
    let labeled = per_sentence.iter().map(|t| t.correct_labeled).sum();
    Ok(ScoreResult {
        uas: percent(heads, n),
        las: percent(labeled, n),
        counted_tokens: n,
        per_sentence,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    #[default]
    Las,
    Uas,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "las" => Ok(Metric::Las),
            "uas" => Ok(Metric::Uas),
            _ => Err(format!("unknown metric '{}'", s)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
    pub metric: Metric,
    pub exclude_punct: bool,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            alpha: 0.05,
            resamples: 10_000,
            seed: 1,
            metric: Metric::Las,
            exclude_punct: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    A,
    B,
    Tie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub test: String,
    pub metric: Metric,
    pub metric_a: f64,
    pub metric_b: f64,
    pub p_value: f64,
    pub better: Better,
    pub alpha: f64,
    pub significant: bool,
    pub resamples: usize,
    pub seed: u64,
}

/// Paired bootstrap over sentences.
///
/// Per-sentence (correct in A, correct in B, tokens) triples are sorted, so
/// the result does not depend on sentence order. Each resample draws as many
/// sentences as there are, with replacement. The p-value is the fraction of
/// resamples in which the system that is better on the full set is not
/// strictly better; it is 1 when both systems score the same.
pub fn compare_significance(
    gold: &Corpus,
    pred_a: &Corpus,
    pred_b: &Corpus,
    cfg: &SignificanceConfig,
) -> Result<SignificanceResult, EvalError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(EvalError::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {}",
            cfg.alpha
        )));
    }
    if cfg.resamples == 0 {
        return Err(EvalError::InvalidConfig(
            "resamples must be positive".into(),
        ));
    }

    let opts = ScoreOptions {
        exclude_punct: cfg.exclude_punct,
    };
    let a = score_with(gold, pred_a, opts)?;
    let b = score_with(gold, pred_b, opts)?;
    let pick = |t: &SentenceTally| match cfg.metric {
        Metric::Las => t.correct_labeled,
        Metric::Uas => t.correct_heads,
    };

    let mut triples: Vec<(i64, i64, i64)> = a
        .per_sentence
        .iter()
        .zip(&b.per_sentence)
        .map(|(ta, tb)| (pick(ta) as i64, pick(tb) as i64, ta.tokens as i64))
        .collect();
    triples.sort_unstable();

    let diff: i64 = triples.iter().map(|t| t.0 - t.1).sum();
    let better = match diff.signum() {
        1 => Better::A,
        -1 => Better::B,
        _ => Better::Tie,
    };

    let p_value = if better == Better::Tie || triples.is_empty() {
        1.0
    } else {
        let mut rng = SeededRng::new(cfg.seed);
        let m = triples.len() as u64;
        let mut not_better = 0usize;
        for _ in 0..cfg.resamples {
            let mut d = 0i64;
            for _ in 0..m {
                let t = triples[rng.below(m) as usize];
                d += t.0 - t.1;
            }
            if d.signum() != diff.signum() {
                not_better += 1;
            }
        }
        not_better as f64 / cfg.resamples as f64
    };

    let (metric_a, metric_b) = match cfg.metric {
        Metric::Las => (a.las, b.las),
        Metric::Uas => (a.uas, b.uas),
    };
    Ok(SignificanceResult {
        test: SIGNIFICANCE_TEST.to_owned(),
        metric: cfg.metric,
        metric_a,
        metric_b,
        p_value,
        better,
        alpha: cfg.alpha,
        significant: p_value < cfg.alpha,
        resamples: cfg.resamples,
        seed: cfg.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub gold_relation: String,
    pub incorrect_predictions: u64,
    pub most_frequent_incorrect_label: String,
    pub count: u64,
}

pub const DEFAULT_THRESHOLD: u64 = 50;

/// Relation errors made by exactly one of two systems.
///
/// Only tokens whose label is wrong in one system and right in the other are
/// considered. For each system, its wrong tokens are grouped by gold relation;
/// groups with more than `threshold` errors are reported together with the
/// most frequent wrong label (ties to the smallest label).
pub fn prediction_analysis(
    gold: &Corpus,
    pred_unconverted: &Corpus,
    pred_converted: &Corpus,
    threshold: u64,
) -> Result<(Vec<ConfusionEntry>, Vec<ConfusionEntry>), EvalError> {
    align(gold, pred_unconverted)?;
    align(gold, pred_converted)?;

    let mut unconverted: BTreeMap<&str, RelationCounts> = BTreeMap::new();
    let mut converted: BTreeMap<&str, RelationCounts> = BTreeMap::new();

    for ((g, u), c) in gold
        .sentences
        .iter()
        .zip(&pred_unconverted.sentences)
        .zip(&pred_converted.sentences)
    {
        for ((gt, ut), ct) in g.tokens.iter().zip(&u.tokens).zip(&c.tokens) {
            let u_wrong = ut.deprel != gt.deprel;
            let c_wrong = ct.deprel != gt.deprel;
            match (u_wrong, c_wrong) {
                (true, false) => unconverted
                    .entry(&gt.deprel)
                    .or_default()
                    .add(&ut.deprel, 1),
                (false, true) => converted.entry(&gt.deprel).or_default().add(&ct.deprel, 1),
                _ => {}
            }
        }
    }

    let table = |groups: BTreeMap<&str, RelationCounts>| -> Vec<ConfusionEntry> {
        groups
            .into_iter()
            .filter(|(_, wrong)| wrong.total() > threshold)
            .map(|(gold_relation, wrong)| {
                let (label, count) = wrong.most_frequent().expect("non-empty group");
                ConfusionEntry {
                    gold_relation: gold_relation.to_owned(),
                    incorrect_predictions: wrong.total(),
                    most_frequent_incorrect_label: label.to_owned(),
                    count,
                }
            })
            .collect()
    };

    Ok((table(unconverted), table(converted)))
}

/// `gold_relation \t incorrect_predictions \t most_frequent_incorrect_label \t count`
/// with a header row.
pub fn write_confusion_tsv<W: Write>(entries: &[ConfusionEntry], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "gold_relation\tincorrect_predictions\tmost_frequent_incorrect_label\tcount"
    )?;
    for e in entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            e.gold_relation, e.incorrect_predictions, e.most_frequent_incorrect_label, e.count
        )?;
    }
    Ok(())
}
