//! TS-Guessing behavioral memorization probes (Experiment 3).
//!
//! Two sub-tasks per question. Option Mask (OM): one *incorrect* answer
//! option is replaced with `[MASK]`, the model is told which option is
//! correct, and is asked to write the masked option's original text — a
//! model with no prior exposure has no principled basis to reconstruct the
//! specific wording of a wrong option. Word Mask (WM): the longest
//! non-stopword token (>= 5 chars) of the stem is blanked and the model
//! fills in the single missing word.
//!
//! A question is flagged for a model when OM partial overlap >= 0.50 or WM
//! recovery is exact.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Category, CategoryMap, DatasetError, Question, SampleSet};
use crate::providers::{ChatClient, ChatRequest, Message};
use crate::textproc::{self, StopwordList, TextError};
use crate::util::parallel_map;

/// Flag rule threshold on the OM partial-match ratio (inclusive).
pub const OM_PARTIAL_THRESHOLD: f64 = 0.50;

/// Blank marker for Word Mask stems. `[MASK]` is reserved for Option Mask.
pub const WM_BLANK: &str = "_____";

pub const OM_MASK: &str = "[MASK]";

#[derive(Debug, Error)]
pub enum TsGuessError {
    #[error("sample references unknown question id '{id}'")]
    UnknownQuestion { id: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Why a question is not eligible for the Word Mask task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WmExclusion {
    /// No non-stopword token of the minimum length in the stem.
    NoQualifyingToken,
    /// The raw stem already contains the blank marker, so a blanked prompt
    /// would be ambiguous.
    StemContainsBlank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmInstance {
    pub question_id: String,
    pub masked_option_index: usize,
    pub reference_text: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmInstance {
    pub question_id: String,
    pub masked_word: String,
    pub token_position: usize,
    pub prompt: String,
}

const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

// Mask choice must be reproducible per (run seed, question), independent of
// sample order.
fn om_rng(seed: u64, question_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"om-mask");
    hasher.update(seed.to_le_bytes());
    hasher.update(question_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Build the Option Mask probe: a uniformly chosen *incorrect* option is
/// replaced by `[MASK]`, and the prompt states which option is correct.
pub fn make_om_instance(question: &Question, seed: u64) -> OmInstance {
    let incorrect: Vec<usize> = (0..4).filter(|&i| i != question.answer_index).collect();
    let mut rng = om_rng(seed, &question.id);
    let masked_option_index = incorrect[rng.gen_range(0..incorrect.len())];
    let reference_text = question.options[masked_option_index].clone();

    let mut prompt = String::new();
    prompt.push_str("One answer option below has been masked out.\n\n");
    prompt.push_str(&format!("Question: {}\n", question.stem));
    for (i, letter) in LETTERS.iter().enumerate() {
        if i == masked_option_index {
            prompt.push_str(&format!("{letter}. {OM_MASK}\n"));
        } else {
            prompt.push_str(&format!("{letter}. {}\n", question.options[i]));
        }
    }
    prompt.push_str(&format!(
        "\nThe correct answer is {}. Write the original text of the masked option. Reply with the option text only.",
        LETTERS[question.answer_index]
    ));

    OmInstance {
        question_id: question.id.clone(),
        masked_option_index,
        reference_text,
        prompt,
    }
}

/// Score an Option Mask response: exact = identical normalized token
/// sequences; partial = fraction of the reference's unique tokens recovered.
pub fn score_om(instance: &OmInstance, response: &str) -> (bool, f64) {
    let reference = textproc::normalize(&instance.reference_text);
    if reference.is_empty() {
        return (false, 0.0);
    }
    let om_exact = textproc::normalize(response) == reference;
    let om_partial = textproc::token_overlap_ratio(&instance.reference_text, response)
        .expect("reference checked non-empty");
    (om_exact, om_partial)
}

/// Build the Word Mask probe: blank the longest qualifying content word at
/// its recorded position. Questions with no qualifying token (or a stem
/// that already contains the blank marker) are excluded from WM — they stay
/// eligible for OM.
pub fn make_wm_instance(
    question: &Question,
    stopwords: &StopwordList,
    min_len: usize,
) -> Result<WmInstance, WmExclusion> {
    if question.stem.contains(WM_BLANK) {
        return Err(WmExclusion::StemContainsBlank);
    }
    let (word, position) = match textproc::longest_content_word(&question.stem, stopwords, min_len)
    {
        Ok(found) => found,
        Err(TextError::NoQualifyingToken { .. }) => return Err(WmExclusion::NoQualifyingToken),
        Err(_) => return Err(WmExclusion::NoQualifyingToken),
    };
    let spans = textproc::tokenize_spans(&question.stem);
    let range = spans[position].1.clone();
    let mut blanked = question.stem.clone();
    blanked.replace_range(range, WM_BLANK);
    let prompt = format!(
        "Fill in the blank. Reply with the single missing word only.\n\nQuestion: {blanked}"
    );
    Ok(WmInstance {
        question_id: question.id.clone(),
        masked_word: word,
        token_position: position,
        prompt,
    })
}

/// Score a Word Mask response: the *first* token of the normalized response
/// must equal the masked word. Models that answer in a sentence are scored
/// on their first word, matching the single-word instruction.
pub fn score_wm(instance: &WmInstance, response: &str) -> bool {
    let response_tokens = textproc::normalize(response);
    match response_tokens.tokens().first() {
        Some(first) => *first == instance.masked_word,
        None => false,
    }
}

/// The per-question flag rule: OM partial >= 0.50 (inclusive) or WM exact.
/// `wm_exact` is None when the question was WM-excluded.
pub fn flag(om_partial_ratio: f64, wm_exact: Option<bool>) -> bool {
    om_partial_ratio >= OM_PARTIAL_THRESHOLD || wm_exact == Some(true)
}

/// Persisted per-(question, model) probe outcome, including raw responses
/// for audit and re-derivation of the flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub question_id: String,
    pub subject: String,
    pub category: Category,
    pub model_id: String,
    pub masked_option_index: usize,
    pub om_exact: bool,
    pub om_partial_ratio: f64,
    /// None when the question is WM-excluded.
    pub masked_word: Option<String>,
    pub wm_exact: Option<bool>,
    pub flagged: bool,
    /// False when a provider call failed; excluded from all denominators.
    pub resolved: bool,
    pub om_raw: String,
    pub wm_raw: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct Exp3Params {
    pub seed: u64,
    pub min_word_len: usize,
    pub max_tokens: u32,
    pub parallelism: usize,
}

/// Run both probes for every (sampled question, model) pair. Results come
/// back sorted by (model, question id).
pub fn run_probes(
    sample: &SampleSet,
    questions: &[Question],
    categories: &CategoryMap,
    models: &[(&ChatClient, &str)],
    stopwords: &StopwordList,
    params: &Exp3Params,
) -> Result<Vec<ProbeResult>, TsGuessError> {
    let index = crate::dataset::index_by_id(questions);
    let mut prepared: Vec<(&Question, Category, OmInstance, Option<WmInstance>)> =
        Vec::with_capacity(sample.question_ids.len());
    for id in &sample.question_ids {
        let question = index
            .get(id.as_str())
            .ok_or_else(|| TsGuessError::UnknownQuestion { id: id.clone() })?;
        let category = categories.category_of(&question.subject)?;
        let om = make_om_instance(question, params.seed);
        let wm = make_wm_instance(question, stopwords, params.min_word_len).ok();
        prepared.push((question, category, om, wm));
    }

    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|q| (0..models.len()).map(move |m| (q, m)))
        .collect();
    let mut results = parallel_map(&jobs, params.parallelism, |(q, m)| {
        let (question, category, om, wm) = &prepared[*q];
        let (client, model_id) = models[*m];
        probe_one(question, *category, om, wm.as_ref(), client, model_id, params.max_tokens)
    });
    results.sort_by(|a, b| (&a.model_id, &a.question_id).cmp(&(&b.model_id, &b.question_id)));
    Ok(results)
}

fn probe_one(
    question: &Question,
    category: Category,
    om: &OmInstance,
    wm: Option<&WmInstance>,
    client: &ChatClient,
    model_id: &str,
    max_tokens: u32,
) -> ProbeResult {
    let ask = |prompt: &str| {
        client.chat(&ChatRequest {
            model_id: model_id.to_string(),
            messages: vec![Message::user(prompt.to_string())],
            temperature: 0.0,
            max_tokens,
        })
    };

    let mut resolved = true;
    let om_raw = match ask(&om.prompt) {
        Ok(response) => response.text,
        Err(e) => {
            eprintln!("warning: {} OM probe failed on '{}': {e}", client.name(), question.id);
            resolved = false;
            String::new()
        }
    };
    let (om_exact, om_partial_ratio) = if resolved {
        score_om(om, &om_raw)
    } else {
        (false, 0.0)
    };

    let (masked_word, wm_exact, wm_raw) = match wm {
        Some(instance) if resolved => match ask(&instance.prompt) {
            Ok(response) => {
                let exact = score_wm(instance, &response.text);
                (Some(instance.masked_word.clone()), Some(exact), Some(response.text))
            }
            Err(e) => {
                eprintln!("warning: {} WM probe failed on '{}': {e}", client.name(), question.id);
                resolved = false;
                (Some(instance.masked_word.clone()), None, None)
            }
        },
        Some(instance) => (Some(instance.masked_word.clone()), None, None),
        None => (None, None, None),
    };

    ProbeResult {
        question_id: question.id.clone(),
        subject: question.subject.clone(),
        category,
        model_id: client.name().to_string(),
        masked_option_index: om.masked_option_index,
        om_exact,
        om_partial_ratio,
        masked_word,
        wm_exact,
        flagged: resolved && flag(om_partial_ratio, wm_exact),
        resolved,
        om_raw,
        wm_raw,
    }
}

/// Per-model probe rates. WM-excluded questions are removed from the WM
/// denominator only; they still count for OM and combined rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRateRow {
    pub model_id: String,
    pub n: usize,
    pub om_exact_rate: f64,
    pub om_partial_rate: f64,
    pub wm_n: usize,
    pub wm_exact_rate: f64,
    pub combined_rate: f64,
}

pub fn aggregate_by_model(results: &[ProbeResult]) -> Vec<ModelRateRow> {
    let mut by_model: BTreeMap<&str, Vec<&ProbeResult>> = BTreeMap::new();
    for result in results.iter().filter(|r| r.resolved) {
        by_model.entry(&result.model_id).or_default().push(result);
    }
    by_model
        .into_iter()
        .map(|(model_id, members)| {
            let n = members.len();
            let om_exact = members.iter().filter(|r| r.om_exact).count();
            let om_partial = members
                .iter()
                .filter(|r| r.om_partial_ratio >= OM_PARTIAL_THRESHOLD)
                .count();
            let wm_present: Vec<_> = members
                .iter()
                .filter(|r| r.wm_exact.is_some())
                .collect();
            let wm_n = wm_present.len();
            let wm_exact = wm_present
                .iter()
                .filter(|r| r.wm_exact == Some(true))
                .count();
            let flagged = members.iter().filter(|r| r.flagged).count();
            ModelRateRow {
                model_id: model_id.to_string(),
                n,
                om_exact_rate: ratio(om_exact, n),
                om_partial_rate: ratio(om_partial, n),
                wm_n,
                wm_exact_rate: ratio(wm_exact, wm_n),
                combined_rate: ratio(flagged, n),
            }
        })
        .collect()
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Per-category OM-partial flag rate, averaged across models with equal
/// model weight. Models with no resolved questions in a category do not
/// contribute to that category's mean.
pub fn aggregate_by_category(results: &[ProbeResult]) -> Vec<(Category, f64)> {
    let models: BTreeSet<&str> = results
        .iter()
        .filter(|r| r.resolved)
        .map(|r| r.model_id.as_str())
        .collect();
    let mut out = Vec::new();
    for category in Category::ALL {
        let mut model_rates = Vec::new();
        for model in &models {
            let members: Vec<&ProbeResult> = results
                .iter()
                .filter(|r| r.resolved && r.model_id == *model && r.category == category)
                .collect();
            if members.is_empty() {
                continue;
            }
            let flags = members
                .iter()
                .filter(|r| r.om_partial_ratio >= OM_PARTIAL_THRESHOLD)
                .count();
            model_rates.push(ratio(flags, members.len()));
        }
        if !model_rates.is_empty() {
            out.push((
                category,
                model_rates.iter().sum::<f64>() / model_rates.len() as f64,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(id: &str, stem: &str, answer_index: usize) -> Question {
        Question {
            id: id.into(),
            subject: "philosophy".into(),
            stem: stem.into(),
            options: [
                "categorical imperative theory".into(),
                "utilitarian calculus".into(),
                "virtue ethics framework".into(),
                "social contract doctrine".into(),
            ],
            answer_index,
        }
    }

    #[test]
    fn om_mask_never_hits_the_answer_and_is_deterministic() {
        for answer_index in 0..4 {
            let q = question("q-det", "Which ethical theory did Kant defend", answer_index);
            let first = make_om_instance(&q, 42);
            assert_ne!(first.masked_option_index, answer_index);
            for _ in 0..5 {
                assert_eq!(make_om_instance(&q, 42), first);
            }
            // A different seed may mask a different option, never the answer.
            let other = make_om_instance(&q, 43);
            assert_ne!(other.masked_option_index, answer_index);
        }
    }

    #[test]
    fn om_prompt_contains_mask_once_and_states_answer() {
        let q = question("q", "Which ethical theory did Kant defend", 0);
        let om = make_om_instance(&q, 42);
        assert_eq!(om.prompt.matches(OM_MASK).count(), 1);
        assert!(om.prompt.contains("The correct answer is A."));
        assert_eq!(om.reference_text, q.options[om.masked_option_index]);
    }

    #[test]
    fn score_om_exact_and_partial() {
        let q = question("q", "stem", 0);
        let mut om = make_om_instance(&q, 42);
        om.reference_text = "social contract doctrine".into();
        assert_eq!(score_om(&om, "social contract doctrine"), (true, 1.0));
        // Normalization-level match still counts as exact.
        assert_eq!(score_om(&om, "Social Contract Doctrine!"), (true, 1.0));
        // 1 of 3 unique reference tokens recovered.
        let (exact, partial) = score_om(&om, "some kind of social arrangement");
        assert!(!exact);
        assert!((partial - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(score_om(&om, ""), (false, 0.0));
    }

    #[test]
    fn score_om_half_overlap() {
        let q = question("q", "stem", 0);
        let mut om = make_om_instance(&q, 42);
        om.reference_text = "alpha beta gamma delta".into();
        let (exact, partial) = score_om(&om, "beta delta unrelated");
        assert!(!exact);
        assert_eq!(partial, 0.5);
    }

    #[test]
    fn wm_blanks_longest_content_word_once() {
        let stops = StopwordList::default_english();
        let q = question("q", "What is the mitochondria of a cell", 0);
        let wm = make_wm_instance(&q, &stops, 5).unwrap();
        assert_eq!(wm.masked_word, "mitochondria");
        assert_eq!(wm.token_position, 3);
        assert_eq!(wm.prompt.matches(WM_BLANK).count(), 1);
        assert!(wm.prompt.contains("What is the _____ of a cell"));
    }

    #[test]
    fn wm_exclusion_paths() {
        let stops = StopwordList::default_english();
        let all_stopwords = question("q", "What is it to be or not", 0);
        assert_eq!(
            make_wm_instance(&all_stopwords, &stops, 5).unwrap_err(),
            WmExclusion::NoQualifyingToken
        );
        let has_blank = question("q", "Complete this _____ with the mitochondria word", 0);
        assert_eq!(
            make_wm_instance(&has_blank, &stops, 5).unwrap_err(),
            WmExclusion::StemContainsBlank
        );
    }

    #[test]
    fn score_wm_first_token_rule() {
        let wm = WmInstance {
            question_id: "q".into(),
            masked_word: "mitochondria".into(),
            token_position: 3,
            prompt: String::new(),
        };
        assert!(score_wm(&wm, "mitochondria"));
        assert!(score_wm(&wm, "Mitochondria,"));
        assert!(!score_wm(&wm, "the mitochondria"));
        assert!(!score_wm(&wm, ""));
    }

    #[test]
    fn flag_boundary_is_inclusive() {
        assert!(flag(0.50, Some(false)));
        assert!(!flag(0.49, Some(false)));
        assert!(flag(0.0, Some(true)));
        assert!(!flag(0.0, Some(false)));
        assert!(!flag(0.49, None));
        assert!(flag(0.50, None));
    }

    fn synthetic_result(
        model: &str,
        id: usize,
        category: Category,
        om_partial: f64,
        om_exact: bool,
        wm_exact: Option<bool>,
    ) -> ProbeResult {
        ProbeResult {
            question_id: format!("q{id:04}"),
            subject: "subject".into(),
            category,
            model_id: model.into(),
            masked_option_index: 0,
            om_exact,
            om_partial_ratio: om_partial,
            masked_word: wm_exact.map(|_| "word".into()),
            wm_exact,
            flagged: flag(om_partial, wm_exact),
            resolved: true,
            om_raw: String::new(),
            wm_raw: None,
        }
    }

    #[test]
    fn model_rates_distributed_memorization_pattern() {
        // 393 of 513 questions with high partial overlap, zero exact
        // matches anywhere: om_partial 76.6%, wm 0%, combined 76.6%.
        let mut results = Vec::new();
        for i in 0..513 {
            let om_partial = if i < 393 { 0.6 } else { 0.2 };
            results.push(synthetic_result("r1", i, Category::Stem, om_partial, false, Some(false)));
        }
        let rows = aggregate_by_model(&results);
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.n, 513);
        assert!((row.om_partial_rate - 0.766).abs() < 0.001);
        assert_eq!(row.om_exact_rate, 0.0);
        assert_eq!(row.wm_exact_rate, 0.0);
        assert!((row.combined_rate - 0.766).abs() < 0.001);
    }

    #[test]
    fn model_rates_with_overlapping_flag_sets() {
        // 193 OM-partial flags, 319 WM flags, 138 questions in both:
        // combined = 193 + 319 - 138 = 374 of 513. OM set = [0,193),
        // WM set = [55,374), intersection = [55,193) = 138.
        let mut results = Vec::new();
        for i in 0..513 {
            let om_flag = i < 193;
            let wm_flag = (55..374).contains(&i);
            results.push(synthetic_result(
                "gpt",
                i,
                Category::Stem,
                if om_flag { 0.75 } else { 0.1 },
                false,
                Some(wm_flag),
            ));
        }
        let rows = aggregate_by_model(&results);
        let row = &rows[0];
        assert!((row.om_partial_rate - 0.376).abs() < 0.001);
        assert!((row.wm_exact_rate - 0.622).abs() < 0.001);
        assert!((row.combined_rate - 0.729).abs() < 0.001);
        // OR-rule dominance.
        assert!(row.combined_rate >= row.om_partial_rate);
        assert!(row.combined_rate >= row.wm_exact_rate);
    }

    #[test]
    fn no_flags_yield_zero_rates() {
        let results: Vec<ProbeResult> = (0..20)
            .map(|i| synthetic_result("m", i, Category::Humanities, 0.0, false, Some(false)))
            .collect();
        let rows = aggregate_by_model(&results);
        let row = &rows[0];
        assert_eq!(row.om_exact_rate, 0.0);
        assert_eq!(row.om_partial_rate, 0.0);
        assert_eq!(row.wm_exact_rate, 0.0);
        assert_eq!(row.combined_rate, 0.0);
    }

    #[test]
    fn wm_excluded_questions_leave_wm_denominator_only() {
        let mut results: Vec<ProbeResult> = (0..8)
            .map(|i| synthetic_result("m", i, Category::Stem, 0.0, false, Some(i < 4)))
            .collect();
        results.push(synthetic_result("m", 8, Category::Stem, 0.9, false, None));
        let rows = aggregate_by_model(&results);
        let row = &rows[0];
        assert_eq!(row.n, 9);
        assert_eq!(row.wm_n, 8);
        assert_eq!(row.wm_exact_rate, 0.5);
        // The excluded question still counts for OM and combined.
        assert!((row.om_partial_rate - 1.0 / 9.0).abs() < 1e-12);
        assert!((row.combined_rate - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn category_rates_average_across_models_equally() {
        // Two models, one category: 60% and 40% OM-partial -> 50% mean.
        let mut results = Vec::new();
        for i in 0..10 {
            results.push(synthetic_result(
                "m1",
                i,
                Category::Stem,
                if i < 6 { 0.8 } else { 0.1 },
                false,
                Some(false),
            ));
            results.push(synthetic_result(
                "m2",
                i,
                Category::Stem,
                if i < 4 { 0.8 } else { 0.1 },
                false,
                Some(false),
            ));
        }
        let rows = aggregate_by_category(&results);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0, Category::Stem);
        assert!((rows[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn category_rates_single_model_match_that_model() {
        let results: Vec<ProbeResult> = (0..10)
            .map(|i| {
                synthetic_result(
                    "only",
                    i,
                    Category::Professional,
                    if i < 3 { 0.9 } else { 0.0 },
                    false,
                    Some(false),
                )
            })
            .collect();
        let rows = aggregate_by_category(&results);
        assert_eq!(rows, vec![(Category::Professional, 0.3)]);
    }

    #[test]
    fn category_fixture_reproduces_reported_column() {
        // Six models with identical per-category per-model flag counts,
        // chosen so the across-model mean lands on the reported rates:
        // STEM 55.9, Professional 44.8, Social Sciences 39.1, Humanities 38.0.
        let spec: [(Category, usize, [usize; 6]); 4] = [
            (Category::Stem, 171, [96, 96, 96, 95, 95, 95]),        // 573/1026 = 55.85%
            (Category::Professional, 126, [57, 57, 56, 56, 56, 56]), // 338/756 = 44.71%
            (Category::SocialSciences, 99, [39, 39, 39, 39, 38, 38]), // 232/594 = 39.06%
            (Category::Humanities, 117, [45, 45, 44, 44, 44, 44]),  // 266/702 = 37.89%
        ];
        let mut results = Vec::new();
        for (category, n, per_model) in &spec {
            for (m, flags) in per_model.iter().enumerate() {
                for i in 0..*n {
                    results.push(synthetic_result(
                        &format!("model{m}"),
                        i + 10_000 * m,
                        *category,
                        if i < *flags { 0.7 } else { 0.0 },
                        false,
                        Some(false),
                    ));
                }
            }
        }
        let rows: BTreeMap<Category, f64> = aggregate_by_category(&results).into_iter().collect();
        assert!((rows[&Category::Stem] - 0.559).abs() < 0.002);
        assert!((rows[&Category::Professional] - 0.448).abs() < 0.002);
        assert!((rows[&Category::SocialSciences] - 0.391).abs() < 0.002);
        assert!((rows[&Category::Humanities] - 0.380).abs() < 0.002);
        // Ranking they imply: STEM > Professional > Social Sciences > Humanities.
        assert!(rows[&Category::Stem] > rows[&Category::Professional]);
        assert!(rows[&Category::Professional] > rows[&Category::SocialSciences]);
        assert!(rows[&Category::SocialSciences] > rows[&Category::Humanities]);
    }

    #[test]
    fn gibberish_responses_never_flag() {
        use crate::providers::{pseudo_words, StubChatMode};
        let _ = StubChatMode::Gibberish; // the stub mode this baseline mirrors
        let q = question("q", "Which ethical theory did Kant defend in his critiques", 0);
        let om = make_om_instance(&q, 42);
        let stops = StopwordList::default_english();
        let wm = make_wm_instance(&q, &stops, 5).unwrap();
        for i in 0..50 {
            let response = pseudo_words(&format!("probe {i}"), 12);
            let (exact, partial) = score_om(&om, &response);
            assert!(!exact);
            assert!(partial < OM_PARTIAL_THRESHOLD);
            assert!(!score_wm(&wm, &response));
        }
    }
}
