//! Fixtures, random generators and brute-force reference implementations
//! shared by the integration tests. Nothing here calls into the library's
//! index, mismatch, neighbor or conversion code.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udharmony::{Corpus, Sentence, Token};

// ---------------------------------------------------------------------------
// Fixtures

pub fn two_word(head: &str, dep: &str, rel: &str) -> String {
    format!(
        "1\t{head}\t{head}\tX\tX\t_\t0\troot\t_\t_\n2\t{dep}\t{dep}\tX\tX\t_\t1\t{rel}\t_\t_\n\n"
    )
}

/// Base {(such, as): fixed x35}.
pub fn such_as_base() -> String {
    two_word("such", "as", "fixed").repeat(35)
}

/// Augment {(such, as): mwe x20, advmod x5}.
pub fn such_as_augment() -> String {
    two_word("such", "as", "mwe").repeat(20) + &two_word("such", "as", "advmod").repeat(5)
}

/// Base {(have, n't): dep x9, (has, n't): neg x5, (would, n't): neg x5}.
pub fn have_nt_base() -> String {
    two_word("have", "n't", "dep").repeat(9)
        + &two_word("has", "n't", "neg").repeat(5)
        + &two_word("would", "n't", "neg").repeat(5)
}

/// Augment {(have, n't): advmod x6}.
pub fn have_nt_augment() -> String {
    two_word("have", "n't", "advmod").repeat(6)
}

/// Toy vectors in which "has" and "would" are the nearest neighbors of
/// "have".
pub const HAVE_NT_VECTORS: &str = "8 4\n\
have 0.9 0.1 0.0 0.0\n\
has 0.85 0.15 0.0 0.05\n\
would 0.8 0.2 0.05 0.0\n\
had 0.7 0.3 0.1 0.0\n\
n't 0.0 0.0 1.0 0.1\n\
not 0.0 0.05 0.95 0.2\n\
never 0.1 0.0 0.8 0.4\n\
dog -0.5 0.5 0.0 0.3\n";

/// Gold and prediction for the hand-counted 5-token case.
///
/// | tok | gold head/rel | pred head/rel | head ok | label ok |
/// |-----|---------------|---------------|---------|----------|
/// | 1   | 2 det         | 2 det         | yes     | yes      |
/// | 2   | 3 nsubj       | 3 nsubj       | yes     | yes      |
/// | 3   | 0 root        | 0 dep         | yes     | no       |
/// | 4   | 5 case        | 3 case        | no      |          |
/// | 5   | 3 obl         | 2 obl         | no      |          |
///
/// 3 of 5 heads correct (UAS 60.00), 2 of 5 labeled correct (LAS 40.00).
pub const SCORE_GOLD: &str = "\
1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_
3\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_
4\tat\tat\tADP\tIN\t_\t5\tcase\t_\t_
5\tnight\tnight\tNOUN\tNN\t_\t3\tobl\t_\t_

";

pub const SCORE_PRED: &str = "\
1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_
3\tbarks\tbark\tVERB\tVBZ\t_\t0\tdep\t_\t_
4\tat\tat\tADP\tIN\t_\t3\tcase\t_\t_
5\tnight\tnight\tNOUN\tNN\t_\t2\tobl\t_\t_

";

// ---------------------------------------------------------------------------
// Random generation

pub const WORDS: &[&str] = &[
    "such", "as", "have", "has", "would", "n't", "the", "dog", "cat", "runs", "Have", "The",
];
pub const LABELS: &[&str] = &[
    "fixed", "mwe", "advmod", "dep", "neg", "nsubj", "obj", "det",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn token(id: usize, form: &str, head: usize, deprel: &str) -> Token {
    Token {
        id,
        form: form.to_owned(),
        lemma: form.to_lowercase(),
        upos: "X".to_owned(),
        xpos: "_".to_owned(),
        feats: "_".to_owned(),
        head,
        deprel: deprel.to_owned(),
        deps: "_".to_owned(),
        misc: "_".to_owned(),
    }
}

/// A random single-rooted tree over `n` tokens.
pub fn random_heads<R: Rng>(r: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let mut heads = vec![0; n + 1];
    for (pos, &tok) in order.iter().enumerate().skip(1) {
        heads[tok] = order[r.random_range(0..pos)];
    }
    heads[1..].to_vec()
}

/// A random corpus whose relation labels are drawn from `labels`.
pub fn random_corpus<R: Rng>(
    r: &mut R,
    sentences: usize,
    words: &[&str],
    labels: &[&str],
    source: &str,
) -> Corpus {
    let mut c = Corpus::new(source);
    for _ in 0..sentences {
        let n = r.random_range(1..=7);
        let heads = random_heads(r, n);
        let mut s = Sentence::default();
        for (i, &h) in heads.iter().enumerate() {
            let form = *words.choose(r).unwrap();
            let rel = if h == 0 {
                "root"
            } else {
                *labels.choose(r).unwrap()
            };
            s.tokens.push(token(i + 1, form, h, rel));
        }
        c.sentences.push(s);
    }
    c
}

/// A base/augment pair with overlapping vocabularies and partly disjoint
/// label sets, so that mismatches occur.
pub fn random_pair(seed: u64, max_sentences: usize) -> (Corpus, Corpus) {
    let mut r = rng(seed);
    let nb = r.random_range(1..=max_sentences);
    let na = r.random_range(1..=max_sentences);
    let base = random_corpus(&mut r, nb, WORDS, &LABELS[..6], "base");
    let aug = random_corpus(&mut r, na, WORDS, &LABELS[1..], "augment");
    (base, aug)
}

/// Random vector rows over the corpus vocabulary plus filler words. Small
/// integer components make exact similarity ties common.
pub fn random_rows(seed: u64, size: usize, dim: usize) -> Vec<(String, Vec<f32>)> {
    let mut r = rng(seed ^ 0x5eed);
    let mut rows = Vec::new();
    let mut words: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
    let mut i = 0;
    while words.len() < size {
        words.push(format!("w{}", i));
        i += 1;
    }
    words.truncate(size);
    for w in words {
        if r.random_bool(0.2) {
            // Leave some corpus words out of the vocabulary.
            if WORDS.contains(&w.as_str()) {
                continue;
            }
        }
        let v: Vec<f32> = (0..dim).map(|_| r.random_range(-2i32..=2) as f32).collect();
        rows.push((w, v));
    }
    rows
}

pub fn rows_to_text(rows: &[(String, Vec<f32>)]) -> String {
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut s = format!("{} {}\n", rows.len(), dim);
    for (w, v) in rows {
        s += w;
        for x in v {
            s += &format!(" {}", x);
        }
        s += "\n";
    }
    s
}

// ---------------------------------------------------------------------------
// Brute-force references

/// Every (head form, dependent form, relation) arc, in corpus order.
pub fn triples(c: &Corpus) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for s in &c.sentences {
        for t in &s.tokens {
            if t.head > 0 {
                let h = &s.tokens[t.head - 1];
                out.push((h.form.clone(), t.form.clone(), t.deprel.clone()));
            }
        }
    }
    out
}

pub fn count_triple(ts: &[(String, String, String)], h: &str, d: &str, r: &str) -> u64 {
    ts.iter()
        .filter(|t| t.0 == h && t.1 == d && t.2 == r)
        .count() as u64
}

/// Distinct (h, d, r) in augment with zero count in base, with augment counts.
pub fn brute_mismatches(base: &Corpus, aug: &Corpus) -> Vec<(String, String, String, u64)> {
    let bt = triples(base);
    let at = triples(aug);
    let mut out: Vec<(String, String, String, u64)> = Vec::new();
    for t in &at {
        if count_triple(&bt, &t.0, &t.1, &t.2) == 0
            && !out.iter().any(|o| o.0 == t.0 && o.1 == t.1 && o.2 == t.2)
        {
            out.push((
                t.0.clone(),
                t.1.clone(),
                t.2.clone(),
                count_triple(&at, &t.0, &t.1, &t.2),
            ));
        }
    }
    out.sort();
    out
}

/// Full-scan top-k by cosine with first-occurrence vocabulary, stable sort
/// for file-order tie-breaking.
pub fn brute_knn(rows: &[(String, Vec<f32>)], word: &str, k: usize) -> Vec<(String, f64)> {
    let mut vocab: Vec<&(String, Vec<f32>)> = Vec::new();
    for row in rows {
        if !vocab.iter().any(|v| v.0 == row.0) {
            vocab.push(row);
        }
    }
    let norm = |v: &[f32]| {
        v.iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt()
    };
    let q = match vocab.iter().find(|v| v.0 == word) {
        Some(q) => q,
        None => return Vec::new(),
    };
    let qn = norm(&q.1);
    if qn == 0.0 {
        return Vec::new();
    }
    let mut scored: Vec<(String, f64)> = vocab
        .iter()
        .filter(|v| v.0 != word)
        .map(|v| {
            let denom = qn * norm(&v.1);
            let sim = if denom == 0.0 {
                0.0
            } else {
                q.1.iter()
                    .zip(&v.1)
                    .map(|(&a, &b)| f64::from(a) * f64::from(b))
                    .sum::<f64>()
                    / denom
            };
            (v.0.clone(), sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored.truncate(k);
    scored
}

/// Relation labels each augment token should carry after conversion,
/// computed step by step: mismatch test, candidate expansion, candidate
/// filtering against base, pooled vote with lexicographic ties.
pub fn brute_convert_labels(
    base: &Corpus,
    aug: &Corpus,
    rows: Option<&[(String, Vec<f32>)]>,
    k: usize,
) -> Vec<Vec<String>> {
    let bt = triples(base);
    let mut out = Vec::new();
    for s in &aug.sentences {
        let mut labels = Vec::new();
        for t in &s.tokens {
            if t.head == 0 {
                labels.push(t.deprel.clone());
                continue;
            }
            let h = &s.tokens[t.head - 1].form;
            let d = &t.form;
            if count_triple(&bt, h, d, &t.deprel) > 0 {
                labels.push(t.deprel.clone());
                continue;
            }
            // Step 1: expansions.
            let expand = |w: &String| {
                let mut ws = vec![w.clone()];
                if let Some(rows) = rows {
                    for (n, _) in brute_knn(rows, w, k) {
                        if !ws.contains(&n) {
                            ws.push(n);
                        }
                    }
                }
                ws
            };
            let hs = expand(h);
            let ds = expand(d);
            // Steps 2-4: candidate pairs that occur in base, pooled.
            let mut pooled: Vec<(String, u64)> = Vec::new();
            for b in &bt {
                if hs.contains(&b.0) && ds.contains(&b.1) {
                    match pooled.iter_mut().find(|p| p.0 == b.2) {
                        Some(p) => p.1 += 1,
                        None => pooled.push((b.2.clone(), 1)),
                    }
                }
            }
            let winner = pooled
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|p| p.0.clone());
            labels.push(winner.unwrap_or_else(|| t.deprel.clone()));
        }
        out.push(labels);
    }
    out
}

pub fn labels_of(c: &Corpus) -> Vec<Vec<String>> {
    c.sentences
        .iter()
        .map(|s| s.tokens.iter().map(|t| t.deprel.clone()).collect())
        .collect()
}

/// Every column except deprel, per token.
pub fn non_deprel_columns(c: &Corpus) -> Vec<Vec<[String; 9]>> {
    c.sentences
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| {
                    [
                        t.id.to_string(),
                        t.form.clone(),
                        t.lemma.clone(),
                        t.upos.clone(),
                        t.xpos.clone(),
                        t.feats.clone(),
                        t.head.to_string(),
                        t.deps.clone(),
                        t.misc.clone(),
                    ]
                })
                .collect()
        })
        .collect()
}
