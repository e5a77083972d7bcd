//! Paraphrase / indirect-reference diagnostic (Experiment 2).
//!
//! A generator model rewrites each question twice: a paraphrase (entirely
//! different wording, same knowledge requirement) and an indirect-reference
//! form (key entities described by an associated property rather than
//! named). Every model answers all three forms at temperature 0; accuracy
//! drops relative to the original form measure surface-pattern reliance.
//!
//! The prompt templates below are pinned so runs are reproducible. They are
//! toolkit-specific wording, not a reconstruction of any particular lab's
//! prompts.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Question;
use crate::providers::{ChatClient, ChatRequest, Message};
use crate::textproc::{self, StopwordList};
use crate::util::parallel_map;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("group '{group}' has no records for form '{form}'")]
    MissingForm { group: String, form: Form },
    #[error("no records to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Original,
    Paraphrased,
    Indirect,
}

impl Form {
    pub const ALL: [Form; 3] = [Form::Original, Form::Paraphrased, Form::Indirect];
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Original => "original",
            Form::Paraphrased => "paraphrased",
            Form::Indirect => "indirect",
        })
    }
}

/// Original question plus its two generated variants. All three share the
/// options list and answer index byte-for-byte; only the stem differs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSet {
    pub question_id: String,
    pub original: Question,
    pub paraphrased: Question,
    pub indirect: Question,
    pub generator_model: String,
}

impl VariantSet {
    pub fn form(&self, form: Form) -> &Question {
        match form {
            Form::Original => &self.original,
            Form::Paraphrased => &self.paraphrased,
            Form::Indirect => &self.indirect,
        }
    }
}

/// A question dropped from the experiment because variant generation could
/// not produce a valid rewrite within the attempt budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedQuestion {
    pub question_id: String,
    pub form: Form,
    pub reason: String,
}

/// One model answer on one form of one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub subject: String,
    pub model_id: String,
    pub form: Form,
    /// None = the response contained no extractable letter (unparsed);
    /// counted incorrect but tallied separately.
    pub predicted_index: Option<u8>,
    pub correct: bool,
    /// False when the provider failed; excluded from denominators.
    pub resolved: bool,
    pub raw_response: String,
}

pub const MCQ_SYSTEM_PROMPT: &str =
    "You are answering a multiple-choice question. Reply with exactly one letter.";

const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

/// Render the pinned MCQ prompt: stem, lettered options, single-letter
/// instruction.
pub fn mcq_user_prompt(question: &Question) -> String {
    let mut prompt = String::new();
    prompt.push_str(&question.stem);
    prompt.push_str("\n\n");
    for (letter, option) in LETTERS.iter().zip(question.options.iter()) {
        prompt.push_str(&format!("{letter}. {option}\n"));
    }
    prompt.push_str("\nAnswer with a single letter.");
    prompt
}

static ANSWER_IS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)answer\s+is\s*:?\s*\(?([A-Da-d])\b").unwrap());
static PARENS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([A-Da-d])\)").unwrap());
static CLOSE_PAREN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Da-d])\)").unwrap());
static LETTER_DOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Da-d])\.").unwrap());

/// Extract a predicted option index from a raw model response.
///
/// Precedence: (1) the whole trimmed response is a sole letter A-D;
/// (2) the earliest of the patterns "answer is X", "(X)", "X)", "X."
/// scanning from the start, ties broken in that pattern order;
/// (3) unparsed. Never fails.
pub fn extract_answer(raw: &str) -> Option<u8> {
    let trimmed = raw.trim();
    if trimmed.chars().count() == 1 {
        if let Some(idx) = letter_index(trimmed.chars().next().unwrap()) {
            return Some(idx);
        }
    }
    let mut best: Option<(usize, usize, u8)> = None; // (start, pattern rank, index)
    for (rank, pattern) in [&*ANSWER_IS, &*PARENS, &*CLOSE_PAREN, &*LETTER_DOT]
        .iter()
        .enumerate()
    {
        if let Some(captures) = pattern.captures(trimmed) {
            let whole = captures.get(0).unwrap();
            let letter = captures.get(1).unwrap().as_str().chars().next().unwrap();
            let idx = letter_index(letter).unwrap();
            let key = (whole.start(), rank, idx);
            if best.map_or(true, |b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
    }
    best.map(|(_, _, idx)| idx)
}

fn letter_index(letter: char) -> Option<u8> {
    match letter.to_ascii_uppercase() {
        'A' => Some(0),
        'B' => Some(1),
        'C' => Some(2),
        'D' => Some(3),
        _ => None,
    }
}

/// Pose one form of one question to a model at temperature 0 and score the
/// parsed answer. Provider failure yields an unresolved record rather than
/// an error.
pub fn evaluate_mcq(
    client: &ChatClient,
    model_id: &str,
    question: &Question,
    form: Form,
    max_tokens: u32,
) -> EvalRecord {
    let request = ChatRequest {
        model_id: model_id.to_string(),
        messages: vec![
            Message::system(MCQ_SYSTEM_PROMPT),
            Message::user(mcq_user_prompt(question)),
        ],
        temperature: 0.0,
        max_tokens,
    };
    match client.chat(&request) {
        Ok(response) => {
            let predicted_index = extract_answer(&response.text);
            let correct = predicted_index == Some(question.answer_index as u8);
            EvalRecord {
                question_id: question.id.clone(),
                subject: question.subject.clone(),
                model_id: client.name().to_string(),
                form,
                predicted_index,
                correct,
                resolved: true,
                raw_response: response.text,
            }
        }
        Err(e) => {
            eprintln!(
                "warning: {} failed on '{}' ({form}): {e}",
                client.name(),
                question.id
            );
            EvalRecord {
                question_id: question.id.clone(),
                subject: question.subject.clone(),
                model_id: client.name().to_string(),
                form,
                predicted_index: None,
                correct: false,
                resolved: false,
                raw_response: String::new(),
            }
        }
    }
}

pub const PARAPHRASE_SYSTEM_PROMPT: &str = "You rewrite exam questions. Rewrite the given \
question with entirely different wording while keeping the knowledge it tests and its correct \
answer unchanged. Reply with the rewritten question only.";

pub const INDIRECT_SYSTEM_PROMPT: &str = "You rewrite exam questions. Rewrite the given question \
so that key subjects and entities are not named directly but described through an associated \
property or event. Keep the knowledge tested and the correct answer unchanged. Reply with the \
rewritten question only.";

fn generation_user_prompt(kind: Form, stem: &str, attempt: u32) -> String {
    let example = match kind {
        Form::Paraphrased => {
            "Original: What is the capital city of France?\n\
             Rewritten: Which city serves as the seat of government of the French republic?"
        }
        _ => {
            "Original: What is the capital city of France?\n\
             Rewritten: What is the capital city of the European country whose revolution began in 1789?"
        }
    };
    let mut prompt = format!("Example:\n{example}\n\nOriginal: {stem}\nRewritten:");
    if attempt > 1 {
        prompt.push_str(&format!(
            "\n(Your previous rewrite was rejected; provide a different one. Attempt {attempt}.)"
        ));
    }
    prompt
}

fn cleanup_generated_stem(raw: &str) -> String {
    let mut text = raw.trim();
    for prefix in ["Rewritten:", "rewritten:"] {
        if let Some(rest) = text.strip_prefix(prefix) {
            text = rest.trim();
        }
    }
    let text = text.trim_matches('"').trim();
    text.to_string()
}

/// The surface entity an indirect rewrite must not repeat: the longest run
/// of two or more capitalized tokens, falling back to the longest content
/// word when the stem has no such run.
pub fn key_entity(stem: &str, stopwords: &StopwordList) -> Option<String> {
    let spans = textproc::tokenize_spans(stem);
    let raw_tokens: Vec<&str> = spans.iter().map(|(_, range)| &stem[range.clone()]).collect();
    let mut best: Option<(usize, usize)> = None; // (start, len) in tokens
    let mut run_start: Option<usize> = None;
    for i in 0..=raw_tokens.len() {
        let capitalized = i < raw_tokens.len()
            && raw_tokens[i].chars().next().is_some_and(|c| c.is_uppercase());
        if capitalized {
            run_start.get_or_insert(i);
        } else if let Some(start) = run_start.take() {
            let len = i - start;
            if len >= 2 && best.map_or(true, |(_, best_len)| len > best_len) {
                best = Some((start, len));
            }
        }
    }
    if let Some((start, len)) = best {
        return Some(raw_tokens[start..start + len].join(" "));
    }
    textproc::longest_content_word(stem, stopwords, 5)
        .ok()
        .map(|(word, _)| word)
}

/// Check a candidate variant stem: non-empty, differs from the original
/// after normalization, and (for indirect rewrites) does not repeat the
/// original's key entity verbatim.
pub fn validate_variant(
    original: &Question,
    variant_stem: &str,
    kind: Form,
    stopwords: &StopwordList,
) -> bool {
    if kind == Form::Original {
        return false;
    }
    let variant_tokens = textproc::normalize(variant_stem);
    if variant_tokens.is_empty() {
        return false;
    }
    if variant_tokens == textproc::normalize(&original.stem) {
        return false;
    }
    if kind == Form::Indirect {
        if let Some(entity) = key_entity(&original.stem, stopwords) {
            if textproc::contains_verbatim(variant_stem, &entity).unwrap_or(false) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub attempts: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 0.7,
            max_tokens: 256,
            attempts: 3,
        }
    }
}

/// Generate and validate both variants for one question. Regeneration is
/// attempted up to `params.attempts` times per form; a question whose
/// rewrite never validates is dropped from the experiment with the reason
/// recorded.
pub fn generate_variants(
    question: &Question,
    client: &ChatClient,
    model_id: &str,
    stopwords: &StopwordList,
    params: &GenParams,
) -> Result<VariantSet, DroppedQuestion> {
    let mut stems: BTreeMap<Form, String> = BTreeMap::new();
    for kind in [Form::Paraphrased, Form::Indirect] {
        let system = match kind {
            Form::Paraphrased => PARAPHRASE_SYSTEM_PROMPT,
            _ => INDIRECT_SYSTEM_PROMPT,
        };
        let mut last_reason = String::new();
        let mut accepted = None;
        for attempt in 1..=params.attempts {
            let request = ChatRequest {
                model_id: model_id.to_string(),
                messages: vec![
                    Message::system(system),
                    Message::user(generation_user_prompt(kind, &question.stem, attempt)),
                ],
                temperature: params.temperature,
                max_tokens: params.max_tokens,
            };
            match client.chat(&request) {
                Ok(response) => {
                    let stem = cleanup_generated_stem(&response.text);
                    if validate_variant(question, &stem, kind, stopwords) {
                        accepted = Some(stem);
                        break;
                    }
                    last_reason = format!("attempt {attempt}: rewrite failed validation");
                }
                Err(e) => {
                    last_reason = format!("attempt {attempt}: provider error: {e}");
                }
            }
        }
        match accepted {
            Some(stem) => {
                stems.insert(kind, stem);
            }
            None => {
                return Err(DroppedQuestion {
                    question_id: question.id.clone(),
                    form: kind,
                    reason: last_reason,
                });
            }
        }
    }
    let with_stem = |stem: &str| {
        let mut q = question.clone();
        q.stem = stem.to_string();
        q
    };
    Ok(VariantSet {
        question_id: question.id.clone(),
        original: question.clone(),
        paraphrased: with_stem(&stems[&Form::Paraphrased]),
        indirect: with_stem(&stems[&Form::Indirect]),
        generator_model: model_id.to_string(),
    })
}

/// Evaluate every model on every form of every variant set, fanning out to
/// `parallelism` workers. Records come back sorted by (model, question,
/// form).
pub fn evaluate_all(
    variants: &[VariantSet],
    models: &[(&ChatClient, &str)],
    max_tokens: u32,
    parallelism: usize,
) -> Vec<EvalRecord> {
    let jobs: Vec<(usize, usize, Form)> = (0..variants.len())
        .flat_map(|v| {
            (0..models.len()).flat_map(move |m| Form::ALL.into_iter().map(move |f| (v, m, f)))
        })
        .collect();
    let mut records = parallel_map(&jobs, parallelism, |(v, m, form)| {
        let (client, model_id) = models[*m];
        evaluate_mcq(client, model_id, variants[*v].form(*form), *form, max_tokens)
    });
    records.sort_by(|a, b| {
        (&a.model_id, &a.question_id, a.form).cmp(&(&b.model_id, &b.question_id, b.form))
    });
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropGrouping {
    Model,
    Subject,
}

/// Accuracy per form and the drops relative to the original form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRow {
    pub group: String,
    pub n: usize,
    pub acc_original: f64,
    pub acc_paraphrased: f64,
    pub acc_indirect: f64,
    pub drop_p: f64,
    pub drop_i: f64,
}

/// Label of the appended unweighted-mean row.
pub const AVERAGE_ROW: &str = "average";

/// Group records by model or subject and compute per-form accuracies and
/// drops, plus an unweighted average row across groups. Unresolved records
/// are excluded from denominators.
pub fn compute_drops(
    records: &[EvalRecord],
    grouping: DropGrouping,
) -> Result<Vec<DropRow>, PerturbError> {
    let mut groups: BTreeMap<String, BTreeMap<Form, (usize, usize)>> = BTreeMap::new();
    for record in records.iter().filter(|r| r.resolved) {
        let label = match grouping {
            DropGrouping::Model => record.model_id.clone(),
            DropGrouping::Subject => record.subject.clone(),
        };
        let (correct, total) = groups
            .entry(label)
            .or_default()
            .entry(record.form)
            .or_insert((0, 0));
        *total += 1;
        if record.correct {
            *correct += 1;
        }
    }
    if groups.is_empty() {
        return Err(PerturbError::Empty);
    }
    let mut rows = Vec::with_capacity(groups.len() + 1);
    for (group, forms) in &groups {
        let accuracy = |form: Form| -> Result<f64, PerturbError> {
            let (correct, total) = forms.get(&form).ok_or_else(|| PerturbError::MissingForm {
                group: group.clone(),
                form,
            })?;
            Ok(*correct as f64 / *total as f64)
        };
        let acc_original = accuracy(Form::Original)?;
        let acc_paraphrased = accuracy(Form::Paraphrased)?;
        let acc_indirect = accuracy(Form::Indirect)?;
        rows.push(DropRow {
            group: group.clone(),
            n: forms[&Form::Original].1,
            acc_original,
            acc_paraphrased,
            acc_indirect,
            drop_p: acc_paraphrased - acc_original,
            drop_i: acc_indirect - acc_original,
        });
    }
    let count = rows.len() as f64;
    let mean = |f: fn(&DropRow) -> f64| rows.iter().map(f).sum::<f64>() / count;
    rows.push(DropRow {
        group: AVERAGE_ROW.to_string(),
        n: rows.iter().map(|r| r.n).sum(),
        acc_original: mean(|r| r.acc_original),
        acc_paraphrased: mean(|r| r.acc_paraphrased),
        acc_indirect: mean(|r| r.acc_indirect),
        drop_p: mean(|r| r.drop_p),
        drop_i: mean(|r| r.drop_i),
    });
    Ok(rows)
}

/// Fraction of resolved responses per (model, form) with no extractable
/// letter. Reported alongside the drop table so strict scoring cannot
/// silently distort accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnparsedRow {
    pub model_id: String,
    pub form: Form,
    pub n: usize,
    pub unparsed_rate: f64,
}

pub fn unparsed_rates(records: &[EvalRecord]) -> Vec<UnparsedRow> {
    let mut groups: BTreeMap<(String, Form), (usize, usize)> = BTreeMap::new();
    for record in records.iter().filter(|r| r.resolved) {
        let (unparsed, total) = groups
            .entry((record.model_id.clone(), record.form))
            .or_insert((0, 0));
        *total += 1;
        if record.predicted_index.is_none() {
            *unparsed += 1;
        }
    }
    groups
        .into_iter()
        .map(|((model_id, form), (unparsed, total))| UnparsedRow {
            model_id,
            form,
            n: total,
            unparsed_rate: unparsed as f64 / total as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{
        RateLimiter, ReplayCache, RetryPolicy, StubChatBackend, StubChatMode,
    };
    use std::sync::Arc;

    fn question(id: &str, stem: &str, answer_index: usize) -> Question {
        Question {
            id: id.into(),
            subject: "high_school_biology".into(),
            stem: stem.into(),
            options: [
                "option alpha".into(),
                "option beta".into(),
                "option gamma".into(),
                "option delta".into(),
            ],
            answer_index,
        }
    }

    fn stub_client(dir: &std::path::Path, mode: StubChatMode) -> ChatClient {
        ChatClient::new(
            "stub-model",
            Box::new(StubChatBackend::new(mode)),
            Arc::new(ReplayCache::new(dir)),
            RateLimiter::unlimited(),
            RetryPolicy::none(),
        )
    }

    #[test]
    fn extract_answer_sole_letter() {
        assert_eq!(extract_answer("B"), Some(1));
        assert_eq!(extract_answer(" d "), Some(3));
    }

    #[test]
    fn extract_answer_patterns_and_precedence() {
        assert_eq!(extract_answer("I think the answer is (D) because..."), Some(3));
        assert_eq!(extract_answer("The answer is (B)."), Some(1));
        assert_eq!(extract_answer("(C)"), Some(2));
        assert_eq!(extract_answer("C) looks right"), Some(2));
        assert_eq!(extract_answer("A. Paris"), Some(0));
        assert_eq!(extract_answer("answer is c"), Some(2));
        // Earliest position wins across patterns.
        assert_eq!(extract_answer("A. something ... the answer is B"), Some(0));
    }

    #[test]
    fn extract_answer_unparsed() {
        assert_eq!(extract_answer("none of these"), None);
        assert_eq!(extract_answer(""), None);
        assert_eq!(extract_answer("the letter E"), None);
    }

    #[test]
    fn mcq_prompt_contains_stem_and_lettered_options() {
        let q = question("q", "What color is the sky?", 1);
        let prompt = mcq_user_prompt(&q);
        assert!(prompt.contains("What color is the sky?"));
        assert!(prompt.contains("A. option alpha"));
        assert!(prompt.contains("D. option delta"));
        assert!(prompt.contains("single letter"));
    }

    #[test]
    fn evaluate_mcq_scores_letter_against_answer_index() {
        let dir = tempfile::tempdir().unwrap();
        let client = stub_client(dir.path(), StubChatMode::Fixed("C".into()));
        let q = question("q", "stem text here", 2);
        let record = evaluate_mcq(&client, "stub", &q, Form::Original, 16);
        assert_eq!(record.predicted_index, Some(2));
        assert!(record.correct);
        assert!(record.resolved);
    }

    #[test]
    fn evaluate_mcq_parses_wrapped_letters() {
        let dir = tempfile::tempdir().unwrap();
        let client = stub_client(dir.path(), StubChatMode::Fixed("The answer is (B).".into()));
        let q = question("q", "stem text here", 1);
        let record = evaluate_mcq(&client, "stub", &q, Form::Paraphrased, 16);
        assert_eq!(record.predicted_index, Some(1));
        assert!(record.correct);
    }

    #[test]
    fn evaluate_mcq_counts_free_text_as_unparsed_incorrect() {
        let dir = tempfile::tempdir().unwrap();
        let client = stub_client(
            dir.path(),
            StubChatMode::Fixed("the question seems ambiguous".into()),
        );
        let q = question("q", "stem text here", 0);
        let record = evaluate_mcq(&client, "stub", &q, Form::Original, 16);
        assert_eq!(record.predicted_index, None);
        assert!(!record.correct);
        assert!(record.resolved);
    }

    #[test]
    fn validate_variant_rules() {
        let stops = StopwordList::default_english();
        let q = question("q", "When did Nikola Tesla demonstrate the induction motor", 0);
        // Identical stem: rejected.
        assert!(!validate_variant(&q, &q.stem, Form::Paraphrased, &stops));
        // Same after normalization: rejected.
        assert!(!validate_variant(&q, "when did nikola tesla demonstrate the induction motor?", Form::Paraphrased, &stops));
        // Empty: rejected.
        assert!(!validate_variant(&q, "  ", Form::Paraphrased, &stops));
        // Genuine rewrite: accepted.
        assert!(validate_variant(
            &q,
            "In which year was the induction motor first shown publicly?",
            Form::Paraphrased,
            &stops
        ));
        // Indirect rewrite naming the entity: rejected.
        assert!(!validate_variant(
            &q,
            "When did Nikola Tesla show his famous rotating-field machine?",
            Form::Indirect,
            &stops
        ));
        // Indirect rewrite describing the entity: accepted.
        assert!(validate_variant(
            &q,
            "When did the Serbian-American inventor of the rotating magnetic field demonstrate his motor?",
            Form::Indirect,
            &stops
        ));
    }

    #[test]
    fn key_entity_prefers_capitalized_spans() {
        let stops = StopwordList::default_english();
        assert_eq!(
            key_entity("When did Nikola Tesla demonstrate it", &stops).unwrap(),
            "Nikola Tesla"
        );
        // No multiword capitalized run: fall back to longest content word.
        assert_eq!(
            key_entity("what causes mitochondria to divide", &stops).unwrap(),
            "mitochondria"
        );
    }

    #[test]
    fn generate_variants_echo_stub_drops_question() {
        let dir = tempfile::tempdir().unwrap();
        // A stub that always returns the original stem can never validate.
        let q = question("q", "some original stem wording here", 0);
        let client = stub_client(dir.path(), StubChatMode::Fixed(q.stem.clone()));
        let stops = StopwordList::default_english();
        let err = generate_variants(&q, &client, "gen", &stops, &GenParams::default()).unwrap_err();
        assert_eq!(err.question_id, "q");
        assert!(err.reason.contains("validation"));
    }

    #[test]
    fn generate_variants_preserves_options_and_answer() {
        let dir = tempfile::tempdir().unwrap();
        let client = stub_client(dir.path(), StubChatMode::Gibberish);
        let q = question("q", "some original stem wording here", 3);
        let stops = StopwordList::default_english();
        let set = generate_variants(&q, &client, "gen", &stops, &GenParams::default()).unwrap();
        assert_eq!(set.paraphrased.options, q.options);
        assert_eq!(set.indirect.options, q.options);
        assert_eq!(set.paraphrased.answer_index, 3);
        assert_eq!(set.indirect.answer_index, 3);
        assert_ne!(set.paraphrased.stem, q.stem);
        assert_ne!(set.indirect.stem, q.stem);
    }

    fn fixture_records(triples: &[(&str, f64, f64, f64)], n: usize) -> Vec<EvalRecord> {
        let mut out = Vec::new();
        for (model, acc_o, acc_p, acc_i) in triples {
            for (form, acc) in [
                (Form::Original, acc_o),
                (Form::Paraphrased, acc_p),
                (Form::Indirect, acc_i),
            ] {
                let correct_count = (acc * n as f64).round() as usize;
                for i in 0..n {
                    out.push(EvalRecord {
                        question_id: format!("q{i}"),
                        subject: "subj".into(),
                        model_id: model.to_string(),
                        form,
                        predicted_index: Some(0),
                        correct: i < correct_count,
                        resolved: true,
                        raw_response: String::new(),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn drop_table_reproduces_reported_model_rows() {
        let triples = [
            ("gpt-4o", 0.588, 0.677, 0.594),
            ("gpt-4o-mini", 0.529, 0.469, 0.490),
            ("deepseek-r1", 0.292, 0.333, 0.260),
            ("deepseek-v3", 0.677, 0.573, 0.615),
            ("llama-3.3-70b", 0.771, 0.635, 0.625),
            ("qwen3-235b", 0.833, 0.698, 0.688),
        ];
        let records = fixture_records(&triples, 1000);
        let rows = compute_drops(&records, DropGrouping::Model).unwrap();
        assert_eq!(rows.len(), 7); // six models + average
        let by_group: BTreeMap<&str, &DropRow> =
            rows.iter().map(|r| (r.group.as_str(), r)).collect();
        let gpt4o = by_group["gpt-4o"];
        assert!((gpt4o.drop_i - 0.006).abs() < 1e-9);
        assert!((gpt4o.drop_p - 0.089).abs() < 1e-9);
        let average = by_group[AVERAGE_ROW];
        assert!((average.acc_original - 0.615).abs() < 0.001);
        assert!((average.acc_paraphrased - 0.564).abs() < 0.001);
        assert!((average.acc_indirect - 0.545).abs() < 0.001);
        assert!((average.drop_p - (-0.051)).abs() < 0.001);
        assert!((average.drop_i - (-0.070)).abs() < 0.001);
    }

    #[test]
    fn drop_identity_holds_per_row() {
        let records = fixture_records(&[("m", 0.5, 0.75, 0.25)], 4);
        let rows = compute_drops(&records, DropGrouping::Model).unwrap();
        let row = &rows[0];
        assert_eq!(row.drop_p + row.acc_original, row.acc_paraphrased);
        assert_eq!(row.drop_i + row.acc_original, row.acc_indirect);
    }

    #[test]
    fn identical_accuracies_yield_zero_drops() {
        let records = fixture_records(&[("m", 0.5, 0.5, 0.5)], 8);
        let rows = compute_drops(&records, DropGrouping::Model).unwrap();
        assert_eq!(rows[0].drop_p, 0.0);
        assert_eq!(rows[0].drop_i, 0.0);
    }

    #[test]
    fn missing_form_is_an_error() {
        let mut records = fixture_records(&[("m", 0.5, 0.5, 0.5)], 4);
        records.retain(|r| r.form != Form::Indirect);
        let err = compute_drops(&records, DropGrouping::Model).unwrap_err();
        assert!(matches!(err, PerturbError::MissingForm { .. }));
    }

    #[test]
    fn unparsed_rates_count_only_unparsed() {
        let mut records = fixture_records(&[("m", 1.0, 1.0, 1.0)], 4);
        records[0].predicted_index = None;
        records[0].correct = false;
        let rows = unparsed_rates(&records);
        let original = rows
            .iter()
            .find(|r| r.form == Form::Original)
            .unwrap();
        assert_eq!(original.unparsed_rate, 0.25);
    }
}
