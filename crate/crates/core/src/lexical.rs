//! Web-overlap contamination detection (Experiment 1).
//!
//! For every sampled question: search the web with the first 150 characters
//! of the stem, collect the top-k result snippets, and flag the question as
//! contaminated only when both conditions hold — the fraction of the stem's
//! 8-grams found in the snippets clears the threshold, AND the correct
//! answer text appears verbatim in a snippet. The dual condition guards
//! against tangentially related pages.
//!
//! Estimated performance gain (EPG) per group is `accuracy x rate x 0.4`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Category, CategoryMap, DatasetError, Question, SampleSet};
use crate::providers::{SearchClient, SearchResult};
use crate::textproc::{self, truncate_chars};
use crate::util::parallel_map;

/// Characters of the raw stem used as the search query.
pub const QUERY_CHAR_LIMIT: usize = 150;

/// EPG scaling constant from the impact-estimation methodology.
pub const EPG_FACTOR: f64 = 0.4;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("threshold {0} must be in (0, 1]")]
    InvalidThreshold(f64),
    #[error("n-gram size must be >= 1")]
    InvalidNgramSize,
    #[error("sample references unknown question id '{id}'")]
    UnknownQuestion { id: String },
    #[error("no reported accuracy for group '{group}'")]
    MissingAccuracy { group: String },
    #[error("{name} {value} out of range [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// How the overlap score is compared against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CmpMode {
    /// Inclusive (score >= threshold). The default.
    #[default]
    Ge,
    /// Strict (score > threshold).
    Gt,
}

impl CmpMode {
    fn passes(&self, score: f64, threshold: f64) -> bool {
        match self {
            CmpMode::Ge => score >= threshold,
            CmpMode::Gt => score > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JudgeConfig {
    threshold: f64,
    mode: CmpMode,
    ngram_size: usize,
}

impl JudgeConfig {
    pub fn new(threshold: f64, mode: CmpMode, ngram_size: usize) -> Result<Self, LexicalError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(LexicalError::InvalidThreshold(threshold));
        }
        if ngram_size == 0 {
            return Err(LexicalError::InvalidNgramSize);
        }
        Ok(JudgeConfig {
            threshold,
            mode,
            ngram_size,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Per-question outcome of the dual-condition rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationVerdict {
    pub question_id: String,
    pub overlap_score: f64,
    pub answer_present: bool,
    pub any_overlap: bool,
    pub contaminated: bool,
}

/// The search query: the first 150 characters of the raw stem, no
/// normalization, cut mid-word if that is where the limit falls.
pub fn build_query(question: &Question) -> String {
    truncate_chars(&question.stem, QUERY_CHAR_LIMIT).to_string()
}

/// Apply the dual condition to one question and its search snippets.
///
/// The overlap score counts the stem's n-grams found in any single snippet;
/// windows never span snippet boundaries, so concatenating unrelated pages
/// cannot manufacture overlap. Questions with stems shorter than the n-gram
/// size score 0.0 and are never flagged. Empty snippet lists score 0.0 with
/// no answer present.
pub fn judge(question: &Question, snippets: &SearchResult, cfg: &JudgeConfig) -> ContaminationVerdict {
    let overlap_score = textproc::ngram_overlap_fraction_multi(
        &question.stem,
        &snippets.snippets,
        cfg.ngram_size,
    )
    .expect("ngram size validated in JudgeConfig");
    // An answer that normalizes to nothing (pure punctuation) can never be
    // "present verbatim".
    let answer_present = snippets.snippets.iter().any(|snippet| {
        textproc::contains_verbatim(snippet, question.answer_text()).unwrap_or(false)
    });
    let contaminated = cfg.mode.passes(overlap_score, cfg.threshold) && answer_present;
    ContaminationVerdict {
        question_id: question.id.clone(),
        overlap_score,
        answer_present,
        any_overlap: overlap_score > 0.0,
        contaminated,
    }
}

/// Estimated accuracy inflation attributable to contaminated items:
/// `accuracy x contamination_rate x 0.4`, exactly.
pub fn epg(accuracy: f64, contamination_rate: f64) -> Result<f64, LexicalError> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(LexicalError::OutOfRange {
            name: "accuracy",
            value: accuracy,
        });
    }
    if !(0.0..=1.0).contains(&contamination_rate) {
        return Err(LexicalError::OutOfRange {
            name: "contamination_rate",
            value: contamination_rate,
        });
    }
    Ok(accuracy * contamination_rate * EPG_FACTOR)
}

/// A persisted verdict: the rule outcome plus the grouping keys and the
/// digest of the snippet evidence (full snippet text lives in the sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub question_id: String,
    pub subject: String,
    pub category: Category,
    pub overlap_score: f64,
    pub answer_present: bool,
    pub any_overlap: bool,
    pub contaminated: bool,
    /// False when the search provider failed for this question; unresolved
    /// records are excluded from every rate denominator.
    pub resolved: bool,
    pub snippet_digest: Option<String>,
}

/// Sidecar store entry: the snippets a verdict was judged against, kept for
/// audit and re-derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub digest: String,
    pub question_id: String,
    pub query: String,
    pub snippets: Vec<String>,
    pub source_urls: Vec<String>,
}

fn snippet_digest(result: &SearchResult) -> String {
    let canonical = serde_json::to_vec(&(&result.snippets, &result.source_urls))
        .expect("serializable");
    hex::encode(Sha256::digest(canonical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Subject,
    Category,
    All,
}

/// One row of a grouped rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub group: String,
    pub n: usize,
    pub contamination_rate: f64,
    pub any_overlap_rate: f64,
    pub answer_present_rate: f64,
    pub avg_overlap: f64,
    pub reported_accuracy: f64,
    pub epg: f64,
}

/// Group resolved verdicts and compute rates, mean overlap, and EPG.
///
/// `accuracies` must hold a reported accuracy for every group label that
/// appears (the "all" grouping uses the key `all`).
pub fn aggregate(
    records: &[VerdictRecord],
    grouping: Grouping,
    accuracies: &BTreeMap<String, f64>,
) -> Result<Vec<RateRow>, LexicalError> {
    let mut groups: BTreeMap<String, Vec<&VerdictRecord>> = BTreeMap::new();
    for record in records.iter().filter(|r| r.resolved) {
        let label = match grouping {
            Grouping::Subject => record.subject.clone(),
            Grouping::Category => record.category.to_string(),
            Grouping::All => "all".to_string(),
        };
        groups.entry(label).or_default().push(record);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (group, members) in groups {
        let accuracy = *accuracies
            .get(&group)
            .ok_or_else(|| LexicalError::MissingAccuracy { group: group.clone() })?;
        let n = members.len();
        let count = |pred: fn(&VerdictRecord) -> bool| {
            members.iter().filter(|r| pred(r)).count() as f64 / n as f64
        };
        let contamination_rate = count(|r| r.contaminated);
        let row = RateRow {
            group,
            n,
            contamination_rate,
            any_overlap_rate: count(|r| r.any_overlap),
            answer_present_rate: count(|r| r.answer_present),
            avg_overlap: members.iter().map(|r| r.overlap_score).sum::<f64>() / n as f64,
            reported_accuracy: accuracy,
            epg: epg(accuracy, contamination_rate)?,
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Build the accuracy map for a grouping, falling back from subject to its
/// category's accuracy to the `all` accuracy when no more specific value is
/// configured.
pub fn accuracy_map_for(
    grouping: Grouping,
    records: &[VerdictRecord],
    configured: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, LexicalError> {
    let mut out = BTreeMap::new();
    let lookup = |keys: &[&str]| -> Option<f64> {
        keys.iter().find_map(|k| configured.get(*k).copied())
    };
    for record in records.iter().filter(|r| r.resolved) {
        let (label, keys): (String, Vec<&str>) = match grouping {
            Grouping::Subject => (
                record.subject.clone(),
                vec![record.subject.as_str(), record.category.as_str(), "all"],
            ),
            Grouping::Category => (
                record.category.to_string(),
                vec![record.category.as_str(), "all"],
            ),
            Grouping::All => ("all".to_string(), vec!["all"]),
        };
        if out.contains_key(&label) {
            continue;
        }
        let accuracy = lookup(&keys).ok_or(LexicalError::MissingAccuracy {
            group: label.clone(),
        })?;
        out.insert(label, accuracy);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Exp1Params {
    pub judge: JudgeConfig,
    pub top_k: usize,
    pub parallelism: usize,
}

#[derive(Debug)]
pub struct Exp1Output {
    pub verdicts: Vec<VerdictRecord>,
    pub snippets: Vec<SnippetRecord>,
    pub unresolved: usize,
}

/// Run the full Experiment 1 pipeline over a sample: search, judge, and
/// collect verdicts plus the snippet sidecar, both sorted by question id.
///
/// Provider failures do not abort the run: the question is recorded as
/// unresolved and excluded from rate denominators.
pub fn run_experiment1(
    sample: &SampleSet,
    questions: &[Question],
    categories: &CategoryMap,
    search: &SearchClient,
    params: &Exp1Params,
) -> Result<Exp1Output, LexicalError> {
    let index = crate::dataset::index_by_id(questions);
    let mut sampled: Vec<(&Question, Category)> = Vec::with_capacity(sample.question_ids.len());
    for id in &sample.question_ids {
        let question = index
            .get(id.as_str())
            .ok_or_else(|| LexicalError::UnknownQuestion { id: id.clone() })?;
        sampled.push((question, categories.category_of(&question.subject)?));
    }

    let results = parallel_map(&sampled, params.parallelism, |(question, category)| {
        let query = build_query(question);
        match search.search(&query, params.top_k) {
            Ok(result) => {
                let verdict = judge(question, &result, &params.judge);
                let digest = snippet_digest(&result);
                let snippet = SnippetRecord {
                    digest: digest.clone(),
                    question_id: question.id.clone(),
                    query,
                    snippets: result.snippets,
                    source_urls: result.source_urls,
                };
                (record_from(question, *category, Some(&verdict), Some(digest)), Some(snippet))
            }
            Err(e) => {
                eprintln!("warning: search failed for '{}': {e}", question.id);
                (record_from(question, *category, None, None), None)
            }
        }
    });

    let mut verdicts: Vec<VerdictRecord> = Vec::with_capacity(results.len());
    let mut snippets: Vec<SnippetRecord> = Vec::new();
    for (record, snippet) in results {
        verdicts.push(record);
        if let Some(s) = snippet {
            snippets.push(s);
        }
    }
    verdicts.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    snippets.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let unresolved = verdicts.iter().filter(|v| !v.resolved).count();
    Ok(Exp1Output {
        verdicts,
        snippets,
        unresolved,
    })
}

fn record_from(
    question: &Question,
    category: Category,
    verdict: Option<&ContaminationVerdict>,
    snippet_digest: Option<String>,
) -> VerdictRecord {
    match verdict {
        Some(v) => VerdictRecord {
            question_id: question.id.clone(),
            subject: question.subject.clone(),
            category,
            overlap_score: v.overlap_score,
            answer_present: v.answer_present,
            any_overlap: v.any_overlap,
            contaminated: v.contaminated,
            resolved: true,
            snippet_digest,
        },
        None => VerdictRecord {
            question_id: question.id.clone(),
            subject: question.subject.clone(),
            category,
            overlap_score: 0.0,
            answer_present: false,
            any_overlap: false,
            contaminated: false,
            resolved: false,
            snippet_digest: None,
        },
    }
}
