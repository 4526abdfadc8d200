use std::time::Duration;

use serde_json::json;

use super::{ChatBackend, ChatExchange, LlmError};
use crate::wire::JsonClient;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpLlmConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for HttpLlmConfig {
    fn default() -> Self {
        HttpLlmConfig {
            base_url: "http://127.0.0.1:8000".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "TOURBOT_LLM_API_KEY".into(),
            timeout: Duration::from_millis(15_000),
        }
    }
}

/// Client for `POST <base_url>/v1/chat/completions`.
pub struct HttpLlm {
    client: JsonClient,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpLlm {
    pub fn new(config: &HttpLlmConfig) -> Self {
        HttpLlm {
            client: JsonClient::new(config.timeout),
            url: format!("{}/v1/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
        }
    }
}

impl ChatBackend for HttpLlm {
    fn chat(&self, exchange: &ChatExchange) -> Result<String, LlmError> {
        exchange.validate()?;
        let body = json!({
            "model": self.model,
            "messages": exchange.messages,
            "temperature": exchange.params.temperature,
            "max_tokens": exchange.params.max_tokens,
        });
        let response = self.client.post(&self.url, self.api_key.as_deref(), &body)?;
        response["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
    }
}
