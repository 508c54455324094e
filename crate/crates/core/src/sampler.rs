//! Seeded half-and-half training samples.
//!
//! A sample of `total` sentences takes `total / 2` sentences from the base
//! corpus and `total / 2` from the augment corpus, each drawn uniformly
//! without replacement. Base indices are drawn first, then augment indices,
//! from a single [`SeededRng`] stream. The output keeps each side's original
//! sentence order, base block first.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conllu::{serialize_corpus, Corpus};
use crate::rng::{SeededRng, GENERATOR_NAME};

pub const DEFAULT_TIERS: [usize; 5] = [250, 500, 1000, 2000, 4000];
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("sample size must be a positive even number, got {0}")]
    InvalidTotal(usize),

    #[error("{side} corpus has {available} sentences, {needed} needed")]
    InsufficientData {
        side: Side,
        needed: usize,
        available: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Base,
    Augment,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Base => "base",
            Side::Augment => "augment",
        })
    }
}

pub struct SamplePlan<'a> {
    pub total_sentences: usize,
    pub base_train: &'a Corpus,
    pub augment_train: &'a Corpus,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub generator: String,
    pub seed: u64,
    pub total: usize,
    pub base_source: String,
    pub augment_source: String,
    pub base_indices: Vec<usize>,
    pub augment_indices: Vec<usize>,
    /// SHA-256 of the emitted CoNLL-U bytes, hex encoded.
    pub checksum: String,
}

/// Sorted indices of `amount` sentences drawn from `corpus`.
pub fn select(
    rng: &mut SeededRng,
    corpus: &Corpus,
    amount: usize,
    side: Side,
) -> Result<Vec<usize>, SampleError> {
    let available = corpus.sentences.len();
    if amount > available {
        return Err(SampleError::InsufficientData {
            side,
            needed: amount,
            available,
        });
    }
    let mut idx = rng.choose_indices(available, amount);
    idx.sort_unstable();
    Ok(idx)
}

pub fn sample(plan: &SamplePlan) -> Result<(Corpus, SampleManifest), SampleError> {
    let total = plan.total_sentences;
    if total == 0 || !total.is_multiple_of(2) {
        return Err(SampleError::InvalidTotal(total));
    }
    let half = total / 2;

    // Check both sides before drawing so the error names the deficient side
    // regardless of draw order.
    for (corpus, side) in [
        (plan.base_train, Side::Base),
        (plan.augment_train, Side::Augment),
    ] {
        if corpus.sentences.len() < half {
            return Err(SampleError::InsufficientData {
                side,
                needed: half,
                available: corpus.sentences.len(),
            });
        }
    }

    let mut rng = SeededRng::new(plan.seed);
    let base_indices = select(&mut rng, plan.base_train, half, Side::Base)?;
    let augment_indices = select(&mut rng, plan.augment_train, half, Side::Augment)?;

    let mut out = Corpus::new(format!("sample_t{}_s{}", total, plan.seed));
    out.sentences.extend(
        base_indices
            .iter()
            .map(|&i| plan.base_train.sentences[i].clone()),
    );
    out.sentences.extend(
        augment_indices
            .iter()
            .map(|&i| plan.augment_train.sentences[i].clone()),
    );

    let checksum = sha256_hex(&serialize_corpus(&out));
    let manifest = SampleManifest {
        generator: GENERATOR_NAME.to_owned(),
        seed: plan.seed,
        total,
        base_source: plan.base_train.source.clone(),
        augment_source: plan.augment_train.source.clone(),
        base_indices,
        augment_indices,
        checksum,
    };
    Ok((out, manifest))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File stem used for a (tier, seed) sample.
pub fn sample_file_stem(total: usize, seed: u64) -> String {
    format!("train_t{}_s{}", total, seed)
}
