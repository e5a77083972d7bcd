//! Build providers from the run configuration: HTTP backends with
//! credentials from the environment, or scripted stubs for offline runs.

use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use contam_core::config::{
    ModelConfig, ProviderKind, RunConfig, SearchProviderKind, StubChatKind,
};
use contam_core::dataset::Question;
use contam_core::providers::{
    ChatClient, HttpChatBackend, HttpSearchBackend, RateLimiter, ReplayCache, RetryPolicy,
    SearchClient, StubChatBackend, StubChatMode, StubSearchBackend, StubSearchMode,
};

pub fn cache(config: &RunConfig) -> Arc<ReplayCache> {
    Arc::new(ReplayCache::new(&config.cache_dir))
}

fn retry_policy(config: &RunConfig) -> RetryPolicy {
    RetryPolicy {
        max_retries: config.max_retries,
        base_delay_ms: config.retry_base_ms,
        max_delay_ms: 10_000,
    }
}

fn default_http_rate() -> f64 {
    2.0
}

/// A namespace with no cached entries cannot serve anything, so a missing
/// credential is fatal up front rather than 500 questions later.
fn preflight_credential(
    cache: &ReplayCache,
    namespace: &str,
    auth_env: &str,
    key: &Option<String>,
) -> Result<()> {
    if key.is_some() {
        return Ok(());
    }
    let namespace_dir = cache.root().join(namespace);
    let has_entries = std::fs::read_dir(&namespace_dir)
        .map(|mut entries| entries.next().is_some())
        .unwrap_or(false);
    if has_entries {
        eprintln!(
            "note: {auth_env} is not set; '{namespace}' will run from the replay cache only"
        );
        Ok(())
    } else {
        bail!("{auth_env} is not set and the cache has no entries for '{namespace}'")
    }
}

pub fn build_search(
    config: &RunConfig,
    cache: Arc<ReplayCache>,
    questions: &[Question],
) -> Result<SearchClient> {
    let search = &config.search;
    let timeout = Duration::from_secs(config.timeout_secs);
    let (backend, limiter): (Box<dyn contam_core::providers::SearchBackend>, RateLimiter) =
        match search.provider {
            SearchProviderKind::Http => {
                let endpoint = search
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| anyhow!("search.endpoint is required for http search"))?;
                let key = std::env::var(search.auth_env()).ok();
                preflight_credential(&cache, "search", search.auth_env(), &key)?;
                (
                    Box::new(HttpSearchBackend::new(endpoint, key, search.auth_env(), timeout)?),
                    RateLimiter::new(search.rate_per_sec.unwrap_or_else(default_http_rate)),
                )
            }
            SearchProviderKind::Empty => (
                Box::new(StubSearchBackend::new(StubSearchMode::Empty)),
                RateLimiter::unlimited(),
            ),
            SearchProviderKind::DatasetEcho => (
                Box::new(StubSearchBackend::new(StubSearchMode::dataset_echo(questions))),
                RateLimiter::unlimited(),
            ),
            SearchProviderKind::Scripted => {
                let script = search
                    .script
                    .as_deref()
                    .ok_or_else(|| anyhow!("search.script is required for scripted search"))?;
                (
                    Box::new(StubSearchBackend::scripted_from_path(script)?),
                    RateLimiter::unlimited(),
                )
            }
        };
    Ok(SearchClient::new("search", backend, cache, limiter, retry_policy(config)))
}

pub fn build_chat(
    config: &RunConfig,
    cache: Arc<ReplayCache>,
    model: &ModelConfig,
) -> Result<ChatClient> {
    let timeout = Duration::from_secs(config.timeout_secs);
    let (backend, limiter): (Box<dyn contam_core::providers::ChatBackend>, RateLimiter) =
        match model.provider {
            ProviderKind::Http => {
                let env_base = std::env::var("MODEL_API_BASE").ok();
                let endpoint = model
                    .endpoint
                    .clone()
                    .or(env_base)
                    .ok_or_else(|| {
                        anyhow!(
                            "models.{}: endpoint is not configured and MODEL_API_BASE is not set",
                            model.name
                        )
                    })?;
                let key = std::env::var(model.auth_env()).ok();
                preflight_credential(&cache, &model.name, model.auth_env(), &key)?;
                (
                    Box::new(HttpChatBackend::new(&endpoint, key, model.auth_env(), timeout)?),
                    RateLimiter::new(model.rate_per_sec.unwrap_or_else(default_http_rate)),
                )
            }
            ProviderKind::Stub => {
                let mode = match model.stub_mode {
                    Some(StubChatKind::Fixed) => StubChatMode::Fixed(
                        model
                            .stub_text
                            .clone()
                            .ok_or_else(|| anyhow!("models.{}: stub_text required", model.name))?,
                    ),
                    Some(StubChatKind::LetterByHash) => StubChatMode::LetterByHash,
                    Some(StubChatKind::Gibberish) => StubChatMode::Gibberish,
                    Some(StubChatKind::Scripted) => {
                        let script = model.script.as_deref().ok_or_else(|| {
                            anyhow!("models.{}: script required", model.name)
                        })?;
                        return Ok(ChatClient::new(
                            &model.name,
                            Box::new(StubChatBackend::scripted_from_path(script)?),
                            cache,
                            RateLimiter::unlimited(),
                            retry_policy(config),
                        ));
                    }
                    None => bail!("models.{}: stub_mode required", model.name),
                };
                (
                    Box::new(StubChatBackend::new(mode)),
                    RateLimiter::unlimited(),
                )
            }
        };
    Ok(ChatClient::new(&model.name, backend, cache, limiter, retry_policy(config)))
}

/// Select models by comma-separated names, or all configured models.
pub fn select_models<'a>(
    config: &'a RunConfig,
    filter: Option<&str>,
) -> Result<Vec<&'a ModelConfig>> {
    match filter {
        None => {
            if config.models.is_empty() {
                bail!("no models configured");
            }
            Ok(config.models.iter().collect())
        }
        Some(list) => {
            let mut selected = Vec::new();
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let model = config
                    .model(name)
                    .with_context(|| format!("unknown model '{name}'"))?;
                selected.push(model);
            }
            if selected.is_empty() {
                bail!("--models selected nothing");
            }
            Ok(selected)
        }
    }
}
