use std::time::Duration;

use serde_json::{json, Value as Json};

use super::provider::{CompletionRequest, Provider, ProviderError};

pub const ENV_URL: &str = "DOCSPEC_PROVIDER_URL";
pub const ENV_MODEL: &str = "DOCSPEC_MODEL";
pub const ENV_KEY_VAR: &str = "DOCSPEC_API_KEY_VAR";
pub const DEFAULT_KEY_VAR: &str = "DOCSPEC_API_KEY";

const SYSTEM_PROMPT: &str = "You produce exactly the requested artifact with no commentary.";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://host/v1`.
    pub url: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
}

impl HttpConfig {
    /// Reads the endpoint from the environment. `Ok(None)` when no endpoint is
    /// configured; an error when an endpoint is set but incomplete.
    pub fn from_env() -> Result<Option<HttpConfig>, ProviderError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Option<HttpConfig>, ProviderError> {
        let Some(url) = get(ENV_URL).filter(|u| !u.trim().is_empty()) else {
            return Ok(None);
        };
        let model = get(ENV_MODEL)
            .filter(|m| !m.trim().is_empty())
            .ok_or_else(|| ProviderError::Config(format!("{ENV_URL} is set but {ENV_MODEL} is not")))?;
        let key_var = get(ENV_KEY_VAR).unwrap_or_else(|| DEFAULT_KEY_VAR.to_string());
        let api_key = get(&key_var)
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::Config(format!("credential variable {key_var} is not set")))?;
        Ok(Some(HttpConfig {
            url: url.trim_end_matches('/').to_string(),
            model,
            api_key,
            timeout: Duration::from_secs(180),
        }))
    }
}

/// Chat-completions client for OpenAI-compatible endpoints.
pub struct HttpProvider {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider { config, client })
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Json {
        let mut body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                { "role": "system", "content": SYSTEM_PROMPT },
                { "role": "user", "content": req.prompt },
            ],
        });
        if req.schema.is_some() {
            body["response_format"] = json!({ "type": "json_object" });
        }
        body
    }
}

/// Pulls the assistant text out of a chat-completions response.
pub fn response_text(body: &Json) -> Result<String, ProviderError> {
    if let Some(err) = body.get("error") {
        let msg = err.get("message").and_then(Json::as_str).unwrap_or("unknown error");
        return Err(ProviderError::Request(msg.to_string()));
    }
    body.pointer("/choices/0/message/content")
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Request("response has no choices[0].message.content".into()))
}

impl Provider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        log::debug!("provider call {}/{}", req.stage, req.key);
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.config.url))
            .bearer_auth(&self.config.api_key)
            .json(&self.request_body(req))
            .send()
            .map_err(|e| ProviderError::Request(e.to_string()))?;
        let status = resp.status();
        let body: Json = resp.json().map_err(|e| ProviderError::Request(e.to_string()))?;
        if !status.is_success() && body.get("error").is_none() {
            return Err(ProviderError::Request(format!("http status {status}")));
        }
        response_text(&body)
    }

    fn identity(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
