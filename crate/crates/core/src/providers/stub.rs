//! Scripted offline backends. These make every pipeline runnable (and
//! testable) with zero network access: fixed responses, prompt-hash-derived
//! responses, and pattern-matched scripts loaded from JSONL.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatRequest, ProviderError, SearchBackend};
use crate::dataset::Question;

/// Shared call counter so tests can assert how often a backend actually ran
/// (a cache hit never reaches the backend).
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicUsize>);

impl CallCounter {
    pub fn count(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone)]
pub enum StubChatMode {
    /// Always the same text.
    Fixed(String),
    /// A single letter A-D chosen by hashing the prompt. Gives varied but
    /// fully deterministic multiple-choice answers.
    LetterByHash,
    /// Deterministic pseudo-words derived from the prompt hash. Useful both
    /// as a "model that knows nothing" baseline and as a variant generator
    /// that always produces a stem different from the original.
    Gibberish,
    /// Substring-matched rules, first match wins. An empty pattern matches
    /// every prompt.
    Scripted(Vec<(String, String)>),
}

pub struct StubChatBackend {
    mode: StubChatMode,
    counter: CallCounter,
}

impl StubChatBackend {
    pub fn new(mode: StubChatMode) -> Self {
        StubChatBackend {
            mode,
            counter: CallCounter::default(),
        }
    }

    pub fn with_counter(mut self, counter: CallCounter) -> Self {
        self.counter = counter;
        self
    }

    /// Load scripted rules from JSONL: one `{"contains": ..., "response": ...}`
    /// object per line.
    pub fn scripted_from_path(path: &Path) -> Result<Self, ProviderError> {
        #[derive(Deserialize)]
        struct Rule {
            contains: String,
            response: String,
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: Rule = serde_json::from_str(line).map_err(|e| {
                ProviderError::InvalidRequest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            rules.push((rule.contains, rule.response));
        }
        Ok(Self::new(StubChatMode::Scripted(rules)))
    }
}

impl ChatBackend for StubChatBackend {
    fn execute(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.counter.bump();
        let prompt = request.prompt_text();
        match &self.mode {
            StubChatMode::Fixed(text) => Ok(text.clone()),
            StubChatMode::LetterByHash => {
                let digest = Sha256::digest(prompt.as_bytes());
                let letter = ["A", "B", "C", "D"][(digest[0] % 4) as usize];
                Ok(letter.to_string())
            }
            StubChatMode::Gibberish => Ok(pseudo_words(&prompt, 12)),
            StubChatMode::Scripted(rules) => rules
                .iter()
                .find(|(pattern, _)| pattern.is_empty() || pattern == "*" || prompt.contains(pattern))
                .map(|(_, response)| response.clone())
                .ok_or(ProviderError::NoScriptMatch),
        }
    }
}

/// Deterministic consonant-vowel pseudo-words from a SHA-256 stream.
pub fn pseudo_words(seed_text: &str, count: usize) -> String {
    const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwxz";
    const VOWELS: &[u8] = b"aeiou";
    let mut words = Vec::with_capacity(count);
    let mut digest = Sha256::digest(seed_text.as_bytes());
    let mut pos = 0;
    let mut next_byte = || {
        if pos >= digest.len() {
            digest = Sha256::digest(&digest);
            pos = 0;
        }
        let b = digest[pos];
        pos += 1;
        b
    };
    for _ in 0..count {
        let syllables = 2 + (next_byte() % 3) as usize;
        let mut word = String::new();
        for _ in 0..syllables {
            word.push(CONSONANTS[(next_byte() as usize) % CONSONANTS.len()] as char);
            word.push(VOWELS[(next_byte() as usize) % VOWELS.len()] as char);
        }
        words.push(word);
    }
    words.join(" ")
}

#[derive(Debug, Clone)]
pub enum StubSearchMode {
    /// No results for any query.
    Empty,
    /// For a query that is a prefix of a known question stem, return one
    /// snippet holding the full stem plus the correct answer text — the
    /// saturation case where every question reads as contaminated.
    DatasetEcho(Vec<(String, String)>),
    /// Substring-matched rules: (query pattern, snippets). Empty pattern
    /// matches everything.
    Scripted(Vec<(String, Vec<String>)>),
}

impl StubSearchMode {
    pub fn dataset_echo(questions: &[Question]) -> Self {
        StubSearchMode::DatasetEcho(
            questions
                .iter()
                .map(|q| {
                    (
                        q.stem.clone(),
                        format!("{} {}", q.stem, q.answer_text()),
                    )
                })
                .collect(),
        )
    }
}

pub struct StubSearchBackend {
    mode: StubSearchMode,
    counter: CallCounter,
}

impl StubSearchBackend {
    pub fn new(mode: StubSearchMode) -> Self {
        StubSearchBackend {
            mode,
            counter: CallCounter::default(),
        }
    }

    pub fn with_counter(mut self, counter: CallCounter) -> Self {
        self.counter = counter;
        self
    }

    /// Load scripted rules from JSONL: `{"query_contains": ..., "snippets": [...]}`.
    pub fn scripted_from_path(path: &Path) -> Result<Self, ProviderError> {
        #[derive(Deserialize)]
        struct Rule {
            query_contains: String,
            snippets: Vec<String>,
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: Rule = serde_json::from_str(line).map_err(|e| {
                ProviderError::InvalidRequest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            rules.push((rule.query_contains, rule.snippets));
        }
        Ok(Self::new(StubSearchMode::Scripted(rules)))
    }
}

impl SearchBackend for StubSearchBackend {
    fn execute(
        &self,
        query: &str,
        top_k: usize,
    ) -> Result<(Vec<String>, Vec<String>), ProviderError> {
        self.counter.bump();
        let snippets: Vec<String> = match &self.mode {
            StubSearchMode::Empty => Vec::new(),
            StubSearchMode::DatasetEcho(entries) => entries
                .iter()
                .find(|(stem, _)| stem.starts_with(query))
                .map(|(_, snippet)| vec![snippet.clone()])
                .unwrap_or_default(),
            StubSearchMode::Scripted(rules) => rules
                .iter()
                .find(|(pattern, _)| {
                    pattern.is_empty() || pattern == "*" || query.contains(pattern)
                })
                .map(|(_, snippets)| snippets.clone())
                .unwrap_or_default(),
        };
        let snippets: Vec<String> = snippets.into_iter().take(top_k).collect();
        let urls = (0..snippets.len())
            .map(|i| format!("stub://result/{i}"))
            .collect();
        Ok((snippets, urls))
    }
}
