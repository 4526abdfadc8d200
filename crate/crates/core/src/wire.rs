//! Blocking JSON-over-HTTP helper shared by the LLM and embedding clients.

use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WireError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

#[derive(Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    timeout: Duration,
}

impl JsonClient {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        JsonClient {
            agent: ureq::Agent::new_with_config(config),
            timeout,
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn post(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, WireError> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body.to_string()).map_err(|e| self.map_error(e))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| self.map_error(e))?;
        if !(200..300).contains(&status) {
            return Err(WireError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| WireError::Malformed(e.to_string()))
    }

    pub fn get(&self, url: &str) -> Result<(u16, Value), WireError> {
        let mut response = self.agent.get(url).call().map_err(|e| self.map_error(e))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| self.map_error(e))?;
        let value = serde_json::from_str(&text).map_err(|e| WireError::Malformed(e.to_string()))?;
        Ok((status, value))
    }

    /// POST that returns the status alongside the body instead of failing
    /// on non-2xx.
    pub fn post_raw(&self, url: &str, body: &Value) -> Result<(u16, Value), WireError> {
        let mut response = self
            .agent
            .post(url)
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(|e| self.map_error(e))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| self.map_error(e))?;
        let value = if text.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).map_err(|e| WireError::Malformed(e.to_string()))?
        };
        Ok((status, value))
    }

    fn map_error(&self, err: ureq::Error) -> WireError {
        match err {
            ureq::Error::Timeout(_) => WireError::Timeout(self.timeout),
            ureq::Error::StatusCode(status) => WireError::Status {
                status,
                body: String::new(),
            },
            other => WireError::Transport(other.to_string()),
        }
    }
}
