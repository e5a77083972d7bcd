//! Deterministic text normalization, n-gram extraction, and overlap metrics.
//!
//! This is the measurement kernel shared by the lexical detector and the
//! TS-Guessing probes. Every function here is pure: identical inputs produce
//! byte-identical outputs, which is what makes warm-cache reruns of the
//! pipelines reproducible.
//!
//! The tokenization rule is fixed: lowercase, treat every non-alphanumeric
//! character as a separator, drop empty tokens. N-gram overlap uses set
//! semantics (duplicate windows collapse).

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("n-gram size must be >= 1")]
    InvalidNgramSize,
    #[error("needle normalizes to an empty token sequence")]
    EmptyNeedle,
    #[error("reference normalizes to an empty token sequence")]
    EmptyReference,
    #[error("no non-stopword token of length >= {min_len} in stem")]
    NoQualifyingToken { min_len: usize },
    #[error("stopword list is empty")]
    EmptyStopwords,
    #[error("failed to read stopword list: {0}")]
    Io(String),
}

/// An ordered sequence of normalized tokens.
///
/// Invariant: tokens are non-empty, lowercase, and contain no whitespace or
/// punctuation (only alphanumeric characters survive normalization).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercase `text`, split on every non-alphanumeric character, and drop
/// empty tokens. The empty string yields an empty sequence.
pub fn normalize(text: &str) -> TokenSequence {
    TokenSequence(
        tokenize_spans(text)
            .into_iter()
            .map(|(token, _)| token)
            .collect(),
    )
}

/// Like [`normalize`], but also returns the byte range each token occupies
/// in the original text. Used when a token has to be replaced in the raw
/// stem (the Word Mask probe) while keeping positions consistent with the
/// normalized view.
pub fn tokenize_spans(text: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(idx);
            }
        } else if let Some(s) = start.take() {
            out.push((text[s..idx].to_lowercase(), s..idx));
        }
    }
    if let Some(s) = start {
        out.push((text[s..].to_lowercase(), s..text.len()));
    }
    out
}

/// All distinct contiguous `n`-token windows of `seq`.
///
/// Sequences shorter than `n` yield the empty set.
pub fn ngrams(seq: &TokenSequence, n: usize) -> Result<HashSet<&[String]>, TextError> {
    if n == 0 {
        return Err(TextError::InvalidNgramSize);
    }
    if seq.len() < n {
        return Ok(HashSet::new());
    }
    Ok(seq.0.windows(n).collect())
}

/// Fraction of the question's n-grams that occur anywhere in the corpus
/// text. Defined as 0.0 when the question has no n-grams at all (fewer than
/// `n` tokens).
pub fn ngram_overlap_fraction(
    question_text: &str,
    corpus_text: &str,
    n: usize,
) -> Result<f64, TextError> {
    let question = normalize(question_text);
    let corpus = normalize(corpus_text);
    let question_grams = ngrams(&question, n)?;
    let corpus_grams = ngrams(&corpus, n)?;
    Ok(overlap_of_sets(&question_grams, &corpus_grams))
}

/// Overlap fraction of a pre-tokenized question against the union of n-gram
/// sets from several corpus texts. Windows never span two corpus texts, so
/// concatenation cannot manufacture n-grams that exist in neither.
pub fn ngram_overlap_fraction_multi(
    question_text: &str,
    corpus_texts: &[String],
    n: usize,
) -> Result<f64, TextError> {
    let question = normalize(question_text);
    let question_grams = ngrams(&question, n)?;
    let corpus_seqs: Vec<TokenSequence> = corpus_texts.iter().map(|t| normalize(t)).collect();
    let mut corpus_grams: HashSet<&[String]> = HashSet::new();
    for seq in &corpus_seqs {
        corpus_grams.extend(ngrams(seq, n)?);
    }
    Ok(overlap_of_sets(&question_grams, &corpus_grams))
}

fn overlap_of_sets(question: &HashSet<&[String]>, corpus: &HashSet<&[String]>) -> f64 {
    if question.is_empty() {
        return 0.0;
    }
    let shared = question.iter().filter(|g| corpus.contains(*g)).count();
    shared as f64 / question.len() as f64
}

/// True iff the normalized tokens of `needle` occur as a contiguous
/// subsequence of the normalized tokens of `haystack`. Casing and
/// punctuation differences do not matter.
pub fn contains_verbatim(haystack: &str, needle: &str) -> Result<bool, TextError> {
    let needle_seq = normalize(needle);
    if needle_seq.is_empty() {
        return Err(TextError::EmptyNeedle);
    }
    let hay_seq = normalize(haystack);
    if hay_seq.len() < needle_seq.len() {
        return Ok(false);
    }
    Ok(hay_seq
        .0
        .windows(needle_seq.len())
        .any(|w| w == needle_seq.tokens()))
}

/// Fraction of the reference's unique tokens that also appear in the
/// candidate. This is recall relative to the reference: 1.0 whenever the
/// reference's tokens are a subset of the candidate's.
pub fn token_overlap_ratio(reference: &str, candidate: &str) -> Result<f64, TextError> {
    let ref_tokens: HashSet<String> = normalize(reference).0.into_iter().collect();
    if ref_tokens.is_empty() {
        return Err(TextError::EmptyReference);
    }
    let cand_tokens: HashSet<String> = normalize(candidate).0.into_iter().collect();
    let shared = ref_tokens.intersection(&cand_tokens).count();
    Ok(shared as f64 / ref_tokens.len() as f64)
}

/// A set of lowercase stopwords, used to pick maskable content words.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// The list checked into the repo (`data/stopwords.txt`), pinned so that
    /// Word Mask choices are reproducible.
    pub fn default_english() -> Self {
        Self::from_lines(include_str!("../../../data/stopwords.txt"))
            .expect("embedded stopword list is non-empty")
    }

    pub fn from_path(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|e| TextError::Io(e.to_string()))?;
        Self::from_lines(&text)
    }

    /// One word per line; blank lines and surrounding whitespace are
    /// ignored. Words are lowercased on load.
    pub fn from_lines(text: &str) -> Result<Self, TextError> {
        let words: HashSet<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if words.is_empty() {
            return Err(TextError::EmptyStopwords);
        }
        Ok(Self { words })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The longest non-stopword token of at least `min_len` characters in
/// `stem`, with its position in the normalized token sequence. Ties go to
/// the earliest occurrence.
pub fn longest_content_word(
    stem: &str,
    stopwords: &StopwordList,
    min_len: usize,
) -> Result<(String, usize), TextError> {
    let mut best: Option<(usize, &str, usize)> = None; // (len, word, pos)
    let tokens = normalize(stem);
    for (pos, token) in tokens.tokens().iter().enumerate() {
        let len = token.chars().count();
        if len < min_len || stopwords.contains(token) {
            continue;
        }
        if best.map_or(true, |(best_len, _, _)| len > best_len) {
            best = Some((len, token, pos));
        }
    }
    best.map(|(_, word, pos)| (word.to_string(), pos))
        .ok_or(TextError::NoQualifyingToken { min_len })
}

/// First `n` characters (Unicode scalar values) of `s`; the whole string if
/// shorter. No normalization is applied, and no attempt is made to cut at a
/// word boundary.
pub fn truncate_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}
