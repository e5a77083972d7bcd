//! Benchmark items, subject→category mapping, and deterministic sampling.
//!
//! Sampling uses ChaCha8 seeded from SHA-256 of (run seed, purpose, subject)
//! over lexicographically sorted question ids. That makes every sample a
//! pure function of (dataset ids, size parameters, seed) — stable across
//! runs and platforms — and keeps each subject's draw independent of the
//! other subjects present.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: question '{id}' duplicates an earlier id")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
    #[error("unknown subject '{subject}' (not present in the category map)")]
    UnknownSubject { subject: String },
    #[error("'{value}' is not a category (expected STEM, Humanities, Social Sciences, or Professional)")]
    UnknownCategory { value: String },
    #[error("category map is empty or unparsable: {0}")]
    BadCategoryMap(String),
    #[error("subject '{subject}' has {available} questions, need {needed}")]
    SubjectTooSmall {
        subject: String,
        available: usize,
        needed: usize,
    },
    #[error("subject '{subject}' has {available} questions left after exclusion, need {needed}")]
    PoolExhausted {
        subject: String,
        available: usize,
        needed: usize,
    },
    #[error("cannot draw {total} questions from an empty subject list")]
    NoSubjects { total: usize },
}

/// The four benchmark categories used for grouped reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Humanities,
    Professional,
    #[serde(rename = "STEM")]
    Stem,
    #[serde(rename = "Social Sciences")]
    SocialSciences,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Humanities,
        Category::Professional,
        Category::Stem,
        Category::SocialSciences,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Humanities => "Humanities",
            Category::Professional => "Professional",
            Category::Stem => "STEM",
            Category::SocialSciences => "Social Sciences",
        }
    }

    pub fn parse(value: &str) -> Result<Self, DatasetError> {
        match value {
            "Humanities" => Ok(Category::Humanities),
            "Professional" => Ok(Category::Professional),
            "STEM" => Ok(Category::Stem),
            "Social Sciences" => Ok(Category::SocialSciences),
            other => Err(DatasetError::UnknownCategory {
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One benchmark item: stem, exactly four options, one correct index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub subject: String,
    pub stem: String,
    pub options: [String; 4],
    pub answer_index: usize,
}

impl Question {
    pub fn answer_text(&self) -> &str {
        &self.options[self.answer_index]
    }
}

/// Subject → category mapping, loaded from a key/value TOML file.
#[derive(Debug, Clone)]
pub struct CategoryMap {
    entries: BTreeMap<String, Category>,
}

impl CategoryMap {
    /// The map checked into the repo (`data/categories.toml`).
    pub fn default_map() -> Self {
        Self::from_toml_str(include_str!("../../../data/categories.toml"))
            .expect("embedded category map parses")
    }

    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DatasetError> {
        let raw: BTreeMap<String, String> =
            toml::from_str(text).map_err(|e| DatasetError::BadCategoryMap(e.to_string()))?;
        if raw.is_empty() {
            return Err(DatasetError::BadCategoryMap("no entries".into()));
        }
        let mut entries = BTreeMap::new();
        for (subject, category) in raw {
            entries.insert(subject, Category::parse(&category)?);
        }
        Ok(Self { entries })
    }

    pub fn category_of(&self, subject: &str) -> Result<Category, DatasetError> {
        self.entries
            .get(subject)
            .copied()
            .ok_or_else(|| DatasetError::UnknownSubject {
                subject: subject.to_string(),
            })
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A persisted selection of question ids.
///
/// `per_subject` is the stratified quota; exclusive (non-stratified) samples
/// record 0 there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub per_subject: u32,
    pub question_ids: Vec<String>,
}

impl SampleSet {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        crate::util::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
    }

    pub fn id_set(&self) -> HashSet<&str> {
        self.question_ids.iter().map(|s| s.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Jsonl,
    Csv,
}

impl FileFormat {
    /// Pick a format from the file extension; defaults to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => FileFormat::Csv,
            _ => FileFormat::Jsonl,
        }
    }
}

// Raw row shape shared by both loaders; `answer` accepts 0-based indices or
// letters A-D.
#[derive(Deserialize)]
struct RawRow {
    id: String,
    subject: String,
    question: String,
    choices: Vec<String>,
    answer: serde_json::Value,
}

fn parse_answer(value: &serde_json::Value) -> Result<usize, String> {
    match value {
        serde_json::Value::Number(n) => n
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| format!("answer '{n}' is not a non-negative integer")),
        serde_json::Value::String(s) => {
            let trimmed = s.trim();
            if let Ok(idx) = trimmed.parse::<usize>() {
                return Ok(idx);
            }
            match trimmed.to_ascii_uppercase().as_str() {
                "A" => Ok(0),
                "B" => Ok(1),
                "C" => Ok(2),
                "D" => Ok(3),
                other => Err(format!("answer '{other}' is neither an index nor a letter A-D")),
            }
        }
        other => Err(format!("answer '{other}' has an unsupported type")),
    }
}

fn finish_row(
    raw: RawRow,
    path: &str,
    line: usize,
    seen: &mut HashSet<String>,
) -> Result<Question, DatasetError> {
    let malformed = |message: String| DatasetError::MalformedRow {
        path: path.to_string(),
        line,
        message,
    };
    if raw.id.trim().is_empty() {
        return Err(malformed("empty id".into()));
    }
    if raw.subject.trim().is_empty() {
        return Err(malformed(format!("question '{}' has an empty subject", raw.id)));
    }
    if raw.question.trim().is_empty() {
        return Err(malformed(format!("question '{}' has an empty stem", raw.id)));
    }
    if raw.choices.len() != 4 {
        return Err(malformed(format!(
            "question '{}' has {} options, expected exactly 4",
            raw.id,
            raw.choices.len()
        )));
    }
    if let Some(pos) = raw.choices.iter().position(|c| c.trim().is_empty()) {
        return Err(malformed(format!(
            "question '{}' has an empty option at position {pos}",
            raw.id
        )));
    }
    let answer_index = parse_answer(&raw.answer).map_err(|m| malformed(format!("question '{}': {m}", raw.id)))?;
    if answer_index > 3 {
        return Err(malformed(format!(
            "question '{}' has answer index {answer_index}, expected 0..=3",
            raw.id
        )));
    }
    if !seen.insert(raw.id.clone()) {
        return Err(DatasetError::DuplicateId {
            path: path.to_string(),
            line,
            id: raw.id,
        });
    }
    let options: [String; 4] = raw
        .choices
        .try_into()
        .expect("length checked above");
    Ok(Question {
        id: raw.id,
        subject: raw.subject,
        stem: raw.question,
        options,
        answer_index,
    })
}

/// Load questions in file order, validating every invariant. Errors name
/// the offending 1-based line (JSONL) or record (CSV).
pub fn load_questions(path: &Path, format: FileFormat) -> Result<Vec<Question>, DatasetError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    match format {
        FileFormat::Jsonl => {
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRow =
                    serde_json::from_str(line).map_err(|e| DatasetError::MalformedRow {
                        path: display.clone(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                out.push(finish_row(raw, &display, idx + 1, &mut seen)?);
            }
        }
        FileFormat::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            #[derive(Deserialize)]
            struct CsvRow {
                id: String,
                subject: String,
                question: String,
                choice_a: String,
                choice_b: String,
                choice_c: String,
                choice_d: String,
                answer: String,
            }
            for (idx, record) in reader.deserialize::<CsvRow>().enumerate() {
                let line = idx + 2; // header occupies line 1
                let row = record.map_err(|e| DatasetError::MalformedRow {
                    path: display.clone(),
                    line,
                    message: e.to_string(),
                })?;
                let raw = RawRow {
                    id: row.id,
                    subject: row.subject,
                    question: row.question,
                    choices: vec![row.choice_a, row.choice_b, row.choice_c, row.choice_d],
                    answer: serde_json::Value::String(row.answer),
                };
                out.push(finish_row(raw, &display, line, &mut seen)?);
            }
        }
    }
    Ok(out)
}

/// Index questions by id for O(log n) lookup while preserving ownership.
pub fn index_by_id(questions: &[Question]) -> BTreeMap<&str, &Question> {
    questions.iter().map(|q| (q.id.as_str(), q)).collect()
}

// One ChaCha8 stream per (seed, purpose, subject); SHA-256 keeps the
// derivation collision-free for arbitrary subject names.
fn derive_rng(seed: u64, purpose: &str, subject: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(purpose.as_bytes());
    hasher.update([0u8]);
    hasher.update(subject.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn ids_by_subject(questions: &[Question]) -> BTreeMap<&str, Vec<&str>> {
    let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for q in questions {
        map.entry(q.subject.as_str()).or_default().push(q.id.as_str());
    }
    for ids in map.values_mut() {
        ids.sort_unstable();
    }
    map
}

/// Draw exactly `per_subject` questions from every subject present.
pub fn sample_stratified(
    questions: &[Question],
    per_subject: u32,
    seed: u64,
) -> Result<SampleSet, DatasetError> {
    let by_subject = ids_by_subject(questions);
    let mut question_ids = Vec::new();
    for (subject, ids) in &by_subject {
        let needed = per_subject as usize;
        if ids.len() < needed {
            return Err(DatasetError::SubjectTooSmall {
                subject: subject.to_string(),
                available: ids.len(),
                needed,
            });
        }
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut derive_rng(seed, "stratified", subject));
        question_ids.extend(shuffled.into_iter().take(needed).map(String::from));
    }
    Ok(SampleSet {
        seed,
        per_subject,
        question_ids,
    })
}

/// Draw ~`total / subjects.len()` questions per listed subject (remainder
/// to the earliest subjects in list order), never reusing an id from
/// `exclude`.
pub fn sample_exclusive(
    questions: &[Question],
    subjects: &[String],
    total: usize,
    exclude: &SampleSet,
    seed: u64,
) -> Result<SampleSet, DatasetError> {
    if subjects.is_empty() {
        if total == 0 {
            return Ok(SampleSet {
                seed,
                per_subject: 0,
                question_ids: Vec::new(),
            });
        }
        return Err(DatasetError::NoSubjects { total });
    }
    let excluded = exclude.id_set();
    let by_subject = ids_by_subject(questions);
    let base = total / subjects.len();
    let remainder = total % subjects.len();
    let mut question_ids = Vec::new();
    for (pos, subject) in subjects.iter().enumerate() {
        let quota = base + usize::from(pos < remainder);
        let pool: Vec<&str> = by_subject
            .get(subject.as_str())
            .map(|ids| {
                ids.iter()
                    .copied()
                    .filter(|id| !excluded.contains(id))
                    .collect()
            })
            .unwrap_or_default();
        if pool.len() < quota {
            return Err(DatasetError::PoolExhausted {
                subject: subject.clone(),
                available: pool.len(),
                needed: quota,
            });
        }
        let mut shuffled = pool;
        shuffled.shuffle(&mut derive_rng(seed, "exclusive", subject));
        question_ids.extend(shuffled.into_iter().take(quota).map(String::from));
    }
    Ok(SampleSet {
        seed,
        per_subject: 0,
        question_ids,
    })
}

/// Count sampled questions per subject; handy for stratification checks.
pub fn subject_counts<'a>(
    sample: &SampleSet,
    index: &BTreeMap<&'a str, &'a Question>,
) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for id in &sample.question_ids {
        if let Some(q) = index.get(id.as_str()) {
            *counts.entry(q.subject.clone()).or_default() += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::io::Write;

    fn question(id: &str, subject: &str) -> Question {
        Question {
            id: id.to_string(),
            subject: subject.to_string(),
            stem: format!("stem for {id} with enough words to matter"),
            options: [
                "alpha".into(),
                "beta".into(),
                "gamma".into(),
                "delta".into(),
            ],
            answer_index: 1,
        }
    }

    fn synthetic(subjects: &[&str], per_subject: usize) -> Vec<Question> {
        let mut out = Vec::new();
        for subject in subjects {
            for i in 0..per_subject {
                out.push(question(&format!("{subject}-{i:03}"), subject));
            }
        }
        out
    }

    #[test]
    fn jsonl_load_preserves_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.jsonl");
        let mut file = std::fs::File::create(&path).unwrap();
        for i in 0..4 {
            writeln!(
                file,
                r#"{{"id":"q{i}","subject":"philosophy","question":"stem {i}","choices":["a","b","c","d"],"answer":{}}}"#,
                i % 4
            )
            .unwrap();
        }
        let qs = load_questions(&path, FileFormat::Jsonl).unwrap();
        assert_eq!(qs.len(), 4);
        assert_eq!(qs[0].id, "q0");
        assert_eq!(qs[3].id, "q3");
        assert_eq!(qs[2].answer_index, 2);
    }

    #[test]
    fn jsonl_rejects_three_options_naming_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"ok","subject":"s","question":"q","choices":["a","b","c","d"],"answer":0}
{"id":"bad","subject":"s","question":"q","choices":["a","b","c"],"answer":0}
"#,
        )
        .unwrap();
        let err = load_questions(&path, FileFormat::Jsonl).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "got: {msg}");
        assert!(msg.contains("3 options"), "got: {msg}");
    }

    #[test]
    fn jsonl_rejects_answer_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"bad","subject":"s","question":"q","choices":["a","b","c","d"],"answer":4}"#,
        )
        .unwrap();
        let err = load_questions(&path, FileFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("answer index 4"));
    }

    #[test]
    fn jsonl_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"dup","subject":"s","question":"q","choices":["a","b","c","d"],"answer":0}
{"id":"dup","subject":"s","question":"q2","choices":["a","b","c","d"],"answer":1}
"#,
        )
        .unwrap();
        let err = load_questions(&path, FileFormat::Jsonl).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn letter_answers_normalize_to_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"q","subject":"s","question":"q","choices":["a","b","c","d"],"answer":"C"}"#,
        )
        .unwrap();
        let qs = load_questions(&path, FileFormat::Jsonl).unwrap();
        assert_eq!(qs[0].answer_index, 2);
    }

    #[test]
    fn csv_loads_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qs.csv");
        std::fs::write(
            &path,
            "id,subject,question,choice_a,choice_b,choice_c,choice_d,answer\n\
             q1,anatomy,What is it,a1,a2,a3,a4,B\n\
             q2,anatomy,What else,b1,b2,b3,b4,0\n",
        )
        .unwrap();
        let qs = load_questions(&path, FileFormat::Csv).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].answer_index, 1);
        assert_eq!(qs[1].answer_index, 0);
    }

    #[test]
    fn default_map_covers_57_subjects_with_expected_counts() {
        let map = CategoryMap::default_map();
        assert_eq!(map.len(), 57);
        let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
        for subject in map.subjects().map(String::from).collect::<Vec<_>>() {
            *counts.entry(map.category_of(&subject).unwrap()).or_default() += 1;
        }
        assert_eq!(counts[&Category::Stem], 19);
        assert_eq!(counts[&Category::Humanities], 13);
        assert_eq!(counts[&Category::SocialSciences], 11);
        assert_eq!(counts[&Category::Professional], 14);
    }

    #[test]
    fn categorize_known_subjects() {
        let map = CategoryMap::default_map();
        assert_eq!(map.category_of("philosophy").unwrap(), Category::Humanities);
        assert_eq!(map.category_of("college_physics").unwrap(), Category::Stem);
    }

    #[test]
    fn categorize_unknown_subject_errors() {
        let map = CategoryMap::default_map();
        let err = map.category_of("underwater_basketry").unwrap_err();
        assert!(err.to_string().contains("underwater_basketry"));
    }

    #[test]
    fn stratified_sample_counts_and_determinism() {
        let map = CategoryMap::default_map();
        let subjects: Vec<&str> = map.subjects().collect();
        let questions = synthetic(&subjects, 12);
        let sample = sample_stratified(&questions, 9, 42).unwrap();
        assert_eq!(sample.question_ids.len(), 57 * 9);
        let index = index_by_id(&questions);
        for (_, count) in subject_counts(&sample, &index) {
            assert_eq!(count, 9);
        }
        // No duplicates.
        let unique: BTreeSet<_> = sample.question_ids.iter().collect();
        assert_eq!(unique.len(), sample.question_ids.len());
        // Same inputs, same output.
        let again = sample_stratified(&questions, 9, 42).unwrap();
        assert_eq!(sample, again);
        // Different seed, different selection.
        let other = sample_stratified(&questions, 9, 43).unwrap();
        assert_ne!(sample.question_ids, other.question_ids);
    }

    #[test]
    fn stratified_zero_is_empty() {
        let questions = synthetic(&["a", "b"], 3);
        let sample = sample_stratified(&questions, 0, 42).unwrap();
        assert!(sample.question_ids.is_empty());
    }

    #[test]
    fn stratified_subject_too_small_is_named() {
        let mut questions = synthetic(&["big"], 10);
        questions.push(question("small-0", "small"));
        let err = sample_stratified(&questions, 9, 42).unwrap_err();
        assert!(err.to_string().contains("'small'"));
    }

    #[test]
    fn exclusive_sample_distributes_remainder_in_list_order() {
        let subjects = vec![
            "s1".to_string(),
            "s2".to_string(),
            "s3".to_string(),
            "s4".to_string(),
            "s5".to_string(),
            "s6".to_string(),
        ];
        let subject_refs: Vec<&str> = subjects.iter().map(|s| s.as_str()).collect();
        let questions = synthetic(&subject_refs, 30);
        let exclude = sample_stratified(&questions, 9, 42).unwrap();
        let sample = sample_exclusive(&questions, &subjects, 100, &exclude, 42).unwrap();
        assert_eq!(sample.question_ids.len(), 100);
        let index = index_by_id(&questions);
        let counts = subject_counts(&sample, &index);
        // 100 = 6*16 + 4: the first four listed subjects get 17.
        assert_eq!(counts["s1"], 17);
        assert_eq!(counts["s2"], 17);
        assert_eq!(counts["s3"], 17);
        assert_eq!(counts["s4"], 17);
        assert_eq!(counts["s5"], 16);
        assert_eq!(counts["s6"], 16);
        // Exclusion soundness, by brute force.
        let excluded = exclude.id_set();
        assert!(sample.question_ids.iter().all(|id| !excluded.contains(id.as_str())));
        // Deterministic.
        let again = sample_exclusive(&questions, &subjects, 100, &exclude, 42).unwrap();
        assert_eq!(sample, again);
    }

    #[test]
    fn exclusive_errors_when_pool_empty() {
        let subjects = vec!["only".to_string()];
        let questions = synthetic(&["only"], 5);
        let everything = SampleSet {
            seed: 1,
            per_subject: 0,
            question_ids: questions.iter().map(|q| q.id.clone()).collect(),
        };
        let err = sample_exclusive(&questions, &subjects, 3, &everything, 7).unwrap_err();
        assert!(matches!(err, DatasetError::PoolExhausted { .. }));
    }

    #[test]
    fn sample_set_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.json");
        let sample = SampleSet {
            seed: 42,
            per_subject: 9,
            question_ids: vec!["a".into(), "b".into()],
        };
        sample.save(&path).unwrap();
        assert_eq!(SampleSet::load(&path).unwrap(), sample);
    }
}
