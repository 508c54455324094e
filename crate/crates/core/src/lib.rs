//! Detection and automatic conversion of dependency-relation annotation
//! differences between two CoNLL-U treebanks.
//!
//! The pipeline indexes the head–dependent word pairs of a *base* corpus and
//! an *augment* corpus ([`pair_index`]), finds relations that the augment
//! corpus uses for a pair but the base corpus never does ([`mismatch`]), and
//! relabels those arcs ([`convert`]) with the most frequent base relation of
//! the pair itself (lexical) or of the pair and its embedding neighbors
//! ([`embed_store`]). [`sampler`] and [`evalx`] provide the seeded training
//! samples and the UAS/LAS scoring used to measure the effect downstream.

pub mod cli;
pub mod conllu;
pub mod convert;
pub mod embed_store;
pub mod evalx;
pub mod mismatch;
pub mod pair_index;
pub mod rng;
pub mod sampler;

pub use conllu::{parse_corpus, serialize_corpus, Corpus, ParseOptions, Sentence, Token};
pub use convert::{
    apply_plan, convert_embedding, convert_lexical, ConversionReport, ConverterConfig, Strategy,
};
pub use embed_store::{Neighbor, NeighborQuery, VectorStore};
pub use evalx::{compare_significance, prediction_analysis, score, ScoreResult};
pub use mismatch::{detect, MismatchSet};
pub use pair_index::{build_index, NormalizationPolicy, PairIndex, PairKey, RelationCounts};
pub use sampler::{sample, SampleManifest, SamplePlan};
