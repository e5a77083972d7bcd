//! Uniform access to chat-completion and web-search endpoints.
//!
//! Every request flows through a content-addressed replay cache: a warm
//! cache answers without touching the network at all, which is what makes
//! reruns deterministic and resumable. Backends are swappable — HTTP
//! adapters for live providers, scripted stubs for offline runs and tests.

mod cache;
mod http;
mod retry;
mod stub;

pub use cache::{CacheEntry, ImportStats, ReplayCache};
pub use http::{HttpChatBackend, HttpSearchBackend};
pub use retry::{RateLimiter, RetryPolicy};
pub use stub::{
    pseudo_words, CallCounter, StubChatBackend, StubChatMode, StubSearchBackend, StubSearchMode,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("credential environment variable {var} is not set")]
    CredentialMissing { var: String },
    #[error("HTTP status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted stub response matches the request")]
    NoScriptMatch,
}

impl ProviderError {
    /// Worth another attempt? Rate limits, server errors, and transport
    /// failures are; everything else is permanent.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            ProviderError::Network(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    fn validate(&self) -> Result<(), ProviderError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(ProviderError::InvalidRequest(
                "at least one user message required".into(),
            ));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ProviderError::InvalidRequest(
                "temperature must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Concatenated message text, used by stubs that key on prompt content.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub model_id: String,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub query: String,
    pub snippets: Vec<String>,
    pub source_urls: Vec<String>,
    pub cached: bool,
}

/// Content hash of the canonical serialized request. Requests are serialized
/// from fixed-order structs, so equal requests always map to equal keys and
/// any field change produces a different key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    digest: String,
}

impl CacheKey {
    pub fn for_chat(request: &ChatRequest) -> Self {
        #[derive(Serialize)]
        struct Canonical<'a> {
            kind: &'static str,
            model_id: &'a str,
            temperature: f64,
            max_tokens: u32,
            messages: &'a [Message],
        }
        let canonical = Canonical {
            kind: "chat",
            model_id: &request.model_id,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            messages: &request.messages,
        };
        Self::from_canonical(&serde_json::to_vec(&canonical).expect("serializable"))
    }

    pub fn for_search(query: &str, top_k: usize) -> Self {
        #[derive(Serialize)]
        struct Canonical<'a> {
            kind: &'static str,
            query: &'a str,
            top_k: usize,
        }
        let canonical = Canonical {
            kind: "search",
            query,
            top_k,
        };
        Self::from_canonical(&serde_json::to_vec(&canonical).expect("serializable"))
    }

    fn from_canonical(bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        CacheKey {
            digest: hex::encode(digest),
        }
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

/// Executes one chat request against some concrete backend.
pub trait ChatBackend: Send + Sync {
    fn execute(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

/// Executes one search against some concrete backend, returning parallel
/// snippet and URL lists, already in provider rank order.
pub trait SearchBackend: Send + Sync {
    fn execute(&self, query: &str, top_k: usize)
        -> Result<(Vec<String>, Vec<String>), ProviderError>;
}

/// A chat endpoint with replay caching, rate limiting, and bounded retries.
pub struct ChatClient {
    name: String,
    backend: Box<dyn ChatBackend>,
    cache: Arc<ReplayCache>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl ChatClient {
    pub fn new(
        name: impl Into<String>,
        backend: Box<dyn ChatBackend>,
        cache: Arc<ReplayCache>,
        limiter: RateLimiter,
        retry: RetryPolicy,
    ) -> Self {
        ChatClient {
            name: name.into(),
            backend,
            cache,
            limiter,
            retry,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Serve from the cache when possible; otherwise call the backend
    /// (rate-limited, retried) and store the response.
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let key = CacheKey::for_chat(request);
        if let Some(entry) = self.cache.get(&self.name, &key)? {
            let text = entry
                .response
                .get("text")
                .and_then(|v| v.as_str())
                .ok_or_else(|| ProviderError::Cache("cached chat entry has no text".into()))?;
            return Ok(ChatResponse {
                text: text.to_string(),
                model_id: request.model_id.clone(),
                cached: true,
            });
        }
        let text = self.retry.run(|| {
            self.limiter.acquire();
            self.backend.execute(request)
        })?;
        self.cache.put(
            &self.name,
            &key,
            serde_json::to_value(request).expect("serializable"),
            serde_json::json!({ "text": text }),
        )?;
        Ok(ChatResponse {
            text,
            model_id: request.model_id.clone(),
            cached: false,
        })
    }
}

/// A search endpoint with the same cache/limit/retry pipeline as chat.
pub struct SearchClient {
    name: String,
    backend: Box<dyn SearchBackend>,
    cache: Arc<ReplayCache>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl SearchClient {
    pub fn new(
        name: impl Into<String>,
        backend: Box<dyn SearchBackend>,
        cache: Arc<ReplayCache>,
        limiter: RateLimiter,
        retry: RetryPolicy,
    ) -> Self {
        SearchClient {
            name: name.into(),
            backend,
            cache,
            limiter,
            retry,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn search(&self, query: &str, top_k: usize) -> Result<SearchResult, ProviderError> {
        if top_k == 0 {
            return Err(ProviderError::InvalidRequest("top_k must be >= 1".into()));
        }
        let key = CacheKey::for_search(query, top_k);
        if let Some(entry) = self.cache.get(&self.name, &key)? {
            let parse = |field: &str| -> Result<Vec<String>, ProviderError> {
                entry
                    .response
                    .get(field)
                    .and_then(|v| v.as_array())
                    .map(|arr| {
                        arr.iter()
                            .filter_map(|v| v.as_str().map(String::from))
                            .collect()
                    })
                    .ok_or_else(|| {
                        ProviderError::Cache(format!("cached search entry has no {field}"))
                    })
            };
            return Ok(SearchResult {
                query: query.to_string(),
                snippets: parse("snippets")?,
                source_urls: parse("urls")?,
                cached: true,
            });
        }
        let (snippets, urls) = self.retry.run(|| {
            self.limiter.acquire();
            self.backend.execute(query, top_k)
        })?;
        let snippets: Vec<String> = snippets.into_iter().take(top_k).collect();
        let urls: Vec<String> = urls.into_iter().take(snippets.len()).collect();
        self.cache.put(
            &self.name,
            &key,
            serde_json::json!({ "query": query, "top_k": top_k }),
            serde_json::json!({ "snippets": snippets, "urls": urls }),
        )?;
        Ok(SearchResult {
            query: query.to_string(),
            snippets,
            source_urls: urls,
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(text: &str) -> ChatRequest {
        ChatRequest {
            model_id: "test-model".into(),
            messages: vec![Message::user(text)],
            temperature: 0.0,
            max_tokens: 16,
        }
    }

    #[test]
    fn cache_key_is_stable_for_equal_requests() {
        let a = CacheKey::for_chat(&request("hello"));
        let b = CacheKey::for_chat(&request("hello"));
        assert_eq!(a, b);
    }

    #[test]
    fn cache_key_changes_with_any_field() {
        let base = request("hello");
        let baseline = CacheKey::for_chat(&base);

        let mut other = base.clone();
        other.temperature = 0.7;
        assert_ne!(CacheKey::for_chat(&other), baseline);

        let mut other = base.clone();
        other.max_tokens = 17;
        assert_ne!(CacheKey::for_chat(&other), baseline);

        let mut other = base.clone();
        other.model_id = "other".into();
        assert_ne!(CacheKey::for_chat(&other), baseline);

        let mut other = base.clone();
        other.messages.insert(0, Message::system("sys"));
        assert_ne!(CacheKey::for_chat(&other), baseline);
    }

    #[test]
    fn chat_and_search_keys_do_not_collide() {
        // Same nominal content, different provider kind.
        assert_ne!(
            CacheKey::for_search("hello", 5).digest(),
            CacheKey::for_chat(&request("hello")).digest()
        );
    }

    #[test]
    fn requests_without_user_message_are_rejected() {
        let req = ChatRequest {
            model_id: "m".into(),
            messages: vec![Message::system("sys only")],
            temperature: 0.0,
            max_tokens: 4,
        };
        let err = req.validate().unwrap_err();
        assert!(matches!(err, ProviderError::InvalidRequest(_)));
    }

    #[test]
    fn chat_serves_second_call_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ReplayCache::new(dir.path()));
        let counter = CallCounter::default();
        let client = ChatClient::new(
            "stub",
            Box::new(
                StubChatBackend::new(StubChatMode::Fixed("B".into()))
                    .with_counter(counter.clone()),
            ),
            cache,
            RateLimiter::unlimited(),
            RetryPolicy::none(),
        );
        let first = client.chat(&request("q")).unwrap();
        assert_eq!(first.text, "B");
        assert!(!first.cached);
        let second = client.chat(&request("q")).unwrap();
        assert_eq!(second.text, "B");
        assert!(second.cached);
        assert_eq!(counter.count(), 1);
    }

    #[test]
    fn search_caps_results_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ReplayCache::new(dir.path()));
        let counter = CallCounter::default();
        let backend = StubSearchBackend::new(StubSearchMode::Scripted(vec![(
            String::new(), // matches everything
            vec!["s1".into(), "s2".into(), "s3".into()],
        )]))
        .with_counter(counter.clone());
        let client = SearchClient::new(
            "stub-search",
            Box::new(backend),
            cache,
            RateLimiter::unlimited(),
            RetryPolicy::none(),
        );
        let result = client.search("anything", 5).unwrap();
        assert_eq!(result.snippets.len(), 3); // fewer hits than top_k
        assert!(!result.cached);
        let capped = client.search("anything", 2).unwrap();
        assert_eq!(capped.snippets.len(), 2);
        let replay = client.search("anything", 5).unwrap();
        assert!(replay.cached);
        assert_eq!(replay.snippets, result.snippets);
        assert_eq!(counter.count(), 2); // top_k=5 and top_k=2 are distinct keys
    }

    #[test]
    fn search_rejects_zero_top_k() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ReplayCache::new(dir.path()));
        let client = SearchClient::new(
            "s",
            Box::new(StubSearchBackend::new(StubSearchMode::Empty)),
            cache,
            RateLimiter::unlimited(),
            RetryPolicy::none(),
        );
        assert!(matches!(
            client.search("q", 0),
            Err(ProviderError::InvalidRequest(_))
        ));
    }
}
