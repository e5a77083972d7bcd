//! HTTP adapters: the de-facto open chat-completions JSON shape for model
//! endpoints, and a minimal JSON POST for search endpoints.

use std::time::Duration;

use serde::Deserialize;

use super::{ChatBackend, ChatRequest, ProviderError, Role, SearchBackend};

fn classify(e: reqwest::Error) -> ProviderError {
    if let Some(status) = e.status() {
        ProviderError::HttpStatus {
            status: status.as_u16(),
            body: String::new(),
        }
    } else {
        ProviderError::Network(e.to_string())
    }
}

fn build_client(timeout: Duration) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| ProviderError::Network(e.to_string()))
}

/// POSTs `{model, messages, temperature, max_tokens}` to
/// `<base>/chat/completions` and reads `choices[0].message.content`.
pub struct HttpChatBackend {
    url: String,
    api_key: Option<String>,
    auth_var: String,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    /// `auth_var` names the environment variable the key came from (or
    /// should have come from); it is only used in error messages.
    pub fn new(
        base: &str,
        api_key: Option<String>,
        auth_var: &str,
        timeout: Duration,
    ) -> Result<Self, ProviderError> {
        Ok(HttpChatBackend {
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
            auth_var: auth_var.to_string(),
            client: build_client(timeout)?,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn execute(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let key = self
            .api_key
            .as_ref()
            .ok_or_else(|| ProviderError::CredentialMissing {
                var: self.auth_var.clone(),
            })?;
        let body = serde_json::json!({
            "model": request.model_id,
            "messages": request.messages.iter().map(|m| {
                serde_json::json!({
                    "role": match m.role { Role::System => "system", Role::User => "user" },
                    "content": m.content,
                })
            }).collect::<Vec<_>>(),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(classify)?;
        let status = response.status();
        let text = response.text().map_err(classify)?;
        if !status.is_success() {
            return Err(ProviderError::HttpStatus {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        #[derive(Deserialize)]
        struct Completion {
            choices: Vec<Choice>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: ChoiceMessage,
        }
        #[derive(Deserialize)]
        struct ChoiceMessage {
            content: Option<String>,
        }
        let parsed: Completion = serde_json::from_str(&text)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::MalformedResponse("no choices[0].message.content".into()))
    }
}

/// POSTs `{query, max_results}` and reads `results[].content` /
/// `results[].url`.
pub struct HttpSearchBackend {
    url: String,
    api_key: Option<String>,
    auth_var: String,
    client: reqwest::blocking::Client,
}

impl HttpSearchBackend {
    pub fn new(
        url: &str,
        api_key: Option<String>,
        auth_var: &str,
        timeout: Duration,
    ) -> Result<Self, ProviderError> {
        Ok(HttpSearchBackend {
            url: url.to_string(),
            api_key,
            auth_var: auth_var.to_string(),
            client: build_client(timeout)?,
        })
    }
}

impl SearchBackend for HttpSearchBackend {
    fn execute(
        &self,
        query: &str,
        top_k: usize,
    ) -> Result<(Vec<String>, Vec<String>), ProviderError> {
        let key = self
            .api_key
            .as_ref()
            .ok_or_else(|| ProviderError::CredentialMissing {
                var: self.auth_var.clone(),
            })?;
        let body = serde_json::json!({ "query": query, "max_results": top_k });
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(classify)?;
        let status = response.status();
        let text = response.text().map_err(classify)?;
        if !status.is_success() {
            return Err(ProviderError::HttpStatus {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        #[derive(Deserialize)]
        struct SearchBody {
            results: Vec<SearchItem>,
        }
        #[derive(Deserialize)]
        struct SearchItem {
            content: String,
            #[serde(default)]
            url: String,
        }
        let parsed: SearchBody = serde_json::from_str(&text)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        let mut snippets = Vec::new();
        let mut urls = Vec::new();
        for item in parsed.results.into_iter().take(top_k) {
            snippets.push(item.content);
            urls.push(item.url);
        }
        Ok((snippets, urls))
    }
}
