//! OpenAI-compatible chat-completion client.

use std::time::Duration;

use crowdsense::pipeline::{LlmProvider, ProviderError};
use serde_json::{json, Value};

pub struct LiveProvider {
    base_url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
}

impl LiveProvider {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>) -> Self {
        LiveProvider {
            base_url: base_url.trim_end_matches('/').to_owned(),
            model: model.to_owned(),
            api_key,
            timeout: Duration::from_secs(120),
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

/// Pull `choices[0].message.content` out of a completion response.
pub fn extract_content(body: &Value) -> Result<String, ProviderError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ProviderError("response has no choices[0].message.content".into()))
}

impl LlmProvider for LiveProvider {
    fn id(&self) -> String {
        format!("live:{}", self.model)
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        // A blocking client must not be created or dropped on an async worker,
        // so it lives only for the duration of this (blocking) call.
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderError(format!("http client: {e}")))?;
        let mut request = client.post(self.endpoint()).json(&json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        }));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| ProviderError(format!("request failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            return Err(ProviderError(format!("provider returned {status}: {snippet}")));
        }
        let body: Value = response
            .json()
            .map_err(|e| ProviderError(format!("response is not JSON: {e}")))?;
        extract_content(&body)
    }
}
