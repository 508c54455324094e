//! CoNLL-U reading and writing.
//!
//! The object model keeps every column other than head and deprel as an
//! opaque string, so that `serialize_corpus(parse_corpus(x)) == x` for any
//! well-formed file. Multiword-token ranges (`3-4`), empty nodes (`5.1`)
//! and comments are kept verbatim as [`NonSyntacticLine`]s, anchored to the
//! number of syntactic tokens that precede them.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    Encoding { offset: usize },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("sentence {sentence}: heads do not form an acyclic tree")]
    CyclicTree { sentence: usize },

    #[error("sentence {sentence}: expected exactly one root, found {roots}")]
    RootCount { sentence: usize, roots: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, ConlluError>;

/// A syntactic word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Index of the governing token, 0 for the root attachment.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineKind {
    MultiwordRange,
    EmptyNode,
    Comment,
}

/// A line that is carried through verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonSyntacticLine {
    pub kind: LineKind,
    pub raw: String,
    /// Number of syntactic tokens emitted before this line.
    pub anchor: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub extras: Vec<NonSyntacticLine>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The token with the given 1-based id.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Form of the head of `token`, `None` for root attachments.
    pub fn head_form(&self, token: &Token) -> Option<&str> {
        if token.head == 0 {
            None
        } else {
            self.token(token.head).map(|t| t.form.as_str())
        }
    }

    /// Checks the single-root, acyclic tree property.
    pub fn check_tree(&self, sentence: usize) -> Result<()> {
        if self.tokens.is_empty() {
            return Ok(());
        }

        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(ConlluError::RootCount { sentence, roots });
        }

        // 0 = unvisited, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; self.tokens.len() + 1];
        state[0] = 2;
        for start in 1..=self.tokens.len() {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = self.tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(ConlluError::CyclicTree { sentence });
            }
            for node in path {
                state[node] = 2;
            }
        }

        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub source: String,
}

impl Corpus {
    pub fn new(source: impl Into<String>) -> Self {
        Corpus {
            sentences: Vec::new(),
            source: source.into(),
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Number of arcs with a non-root head.
    pub fn arc_count(&self) -> usize {
        self.sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.head > 0)
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject sentences that are not single-rooted trees. When false, such
    /// sentences are accepted and reported as warnings.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

/// A tree violation that was tolerated in lenient mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeWarning {
    pub sentence: usize,
    pub message: String,
}

impl fmt::Display for TreeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sentence {}: {}", self.sentence, self.message)
    }
}

/// Parses a corpus, logging tolerated tree violations.
pub fn parse_corpus(input: &[u8], source: &str, opts: ParseOptions) -> Result<Corpus> {
    let (corpus, warnings) = parse_corpus_with_warnings(input, source, opts)?;
    for w in &warnings {
        log::warn!("{}: {}", source, w);
    }
    Ok(corpus)
}

pub fn parse_corpus_with_warnings(
    input: &[u8],
    source: &str,
    opts: ParseOptions,
) -> Result<(Corpus, Vec<TreeWarning>)> {
    let text = std::str::from_utf8(input).map_err(|e| ConlluError::Encoding {
        offset: e.valid_up_to(),
    })?;

    let mut corpus = Corpus::new(source);
    let mut warnings = Vec::new();
    let mut current = Sentence::default();
    let mut in_sentence = false;
    // Line number of each token in `current`, for head-range errors.
    let mut token_lines: Vec<usize> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            if in_sentence {
                finish_sentence(
                    &mut corpus,
                    &mut current,
                    &mut token_lines,
                    opts,
                    &mut warnings,
                )?;
                in_sentence = false;
            }
            continue;
        }
        in_sentence = true;

        if line.starts_with('#') {
            current.extras.push(NonSyntacticLine {
                kind: LineKind::Comment,
                raw: line.to_owned(),
                anchor: current.tokens.len(),
            });
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(malformed(
                line_no,
                format!("expected 10 columns, found {}", cols.len()),
            ));
        }
        if let Some(i) = cols.iter().position(|c| c.is_empty()) {
            return Err(malformed(line_no, format!("column {} is empty", i + 1)));
        }

        let id = cols[0];
        if let Some((lo, hi)) = id.split_once('-') {
            parse_int(lo, line_no, "range start")?;
            parse_int(hi, line_no, "range end")?;
            current.extras.push(NonSyntacticLine {
                kind: LineKind::MultiwordRange,
                raw: line.to_owned(),
                anchor: current.tokens.len(),
            });
            continue;
        }
        if let Some((major, minor)) = id.split_once('.') {
            parse_int(major, line_no, "empty node id")?;
            parse_int(minor, line_no, "empty node id")?;
            current.extras.push(NonSyntacticLine {
                kind: LineKind::EmptyNode,
                raw: line.to_owned(),
                anchor: current.tokens.len(),
            });
            continue;
        }

        let id = parse_int(id, line_no, "id")?;
        let expected = current.tokens.len() + 1;
        if id != expected {
            return Err(malformed(
                line_no,
                format!("token id {} out of sequence, expected {}", id, expected),
            ));
        }
        let head = parse_int(cols[6], line_no, "head")?;

        current.tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            upos: cols[3].to_owned(),
            xpos: cols[4].to_owned(),
            feats: cols[5].to_owned(),
            head,
            deprel: cols[7].to_owned(),
            deps: cols[8].to_owned(),
            misc: cols[9].to_owned(),
        });
        token_lines.push(line_no);
    }

    if in_sentence {
        finish_sentence(
            &mut corpus,
            &mut current,
            &mut token_lines,
            opts,
            &mut warnings,
        )?;
    }

    Ok((corpus, warnings))
}

fn finish_sentence(
    corpus: &mut Corpus,
    current: &mut Sentence,
    token_lines: &mut Vec<usize>,
    opts: ParseOptions,
    warnings: &mut Vec<TreeWarning>,
) -> Result<()> {
    let sentence = std::mem::take(current);
    let lines = std::mem::take(token_lines);
    let n = sentence.tokens.len();
    for (i, token) in sentence.tokens.iter().enumerate() {
        if token.head > n {
            return Err(malformed(
                lines[i],
                format!("head {} exceeds sentence length {}", token.head, n),
            ));
        }
    }

    let index = corpus.sentences.len();
    if let Err(e) = sentence.check_tree(index) {
        if opts.strict {
            return Err(e);
        }
        warnings.push(TreeWarning {
            sentence: index,
            message: e.to_string(),
        });
    }

    corpus.sentences.push(sentence);
    Ok(())
}

fn parse_int(s: &str, line: usize, what: &str) -> Result<usize> {
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(
            line,
            format!("{} '{}' is not an integer", what, s),
        ));
    }
    s.parse()
        .map_err(|_| malformed(line, format!("{} '{}' is not an integer", what, s)))
}

fn malformed(line: usize, reason: String) -> ConlluError {
    ConlluError::MalformedLine { line, reason }
}

/// Writes a corpus. Each sentence is terminated by a blank line.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for sentence in &corpus.sentences {
        write_sentence(sentence, &mut out)?;
    }
    Ok(())
}

pub fn write_sentence<W: Write>(sentence: &Sentence, out: &mut W) -> io::Result<()> {
    let mut extras = sentence.extras.iter().peekable();
    for pos in 0..=sentence.tokens.len() {
        while let Some(extra) = extras.next_if(|e| e.anchor <= pos) {
            writeln!(out, "{}", extra.raw)?;
        }
        if let Some(t) = sentence.tokens.get(pos) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
            )?;
        }
    }
    for extra in extras {
        writeln!(out, "{}", extra.raw)?;
    }
    writeln!(out)
}

pub fn serialize_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf).expect("writing to a Vec cannot fail");
    buf
}
