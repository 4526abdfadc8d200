//! Chat-completion clients: an OpenAI-compatible HTTP backend and a
//! deterministic mock for tests and offline runs.

mod http;
mod mock;
mod prompt;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpLlm, HttpLlmConfig};
pub use mock::{MockLlm, Responder};
pub use prompt::{PromptError, PromptLibrary, PromptTemplate};

use crate::wire::WireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        ChatParams {
            temperature: 0.7,
            max_tokens: 160,
        }
    }
}

/// One request to a chat model.
///
/// `prompt_id` and `vars` record which template produced the messages and
/// with which values; they are never sent over the wire but let the mock
/// script answers per template.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub prompt_id: String,
    pub messages: Vec<ChatMessage>,
    pub params: ChatParams,
    pub vars: BTreeMap<String, String>,
}

impl ChatExchange {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => Err(LlmError::InvalidExchange("no messages".into())),
            Some(m) if m.role != Role::System => {
                Err(LlmError::InvalidExchange("first message must have the system role".into()))
            }
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("invalid exchange: {0}")]
    InvalidExchange(String),
    #[error("LLM request timed out after {0:?}")]
    Timeout(Duration),
    #[error("LLM server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed LLM response: {0}")]
    Malformed(String),
    #[error("LLM transport failure: {0}")]
    Transport(String),
}

impl From<WireError> for LlmError {
    fn from(err: WireError) -> Self {
        match err {
            WireError::Timeout(d) => LlmError::Timeout(d),
            WireError::Status { status, body } => LlmError::Status { status, body },
            WireError::Malformed(m) => LlmError::Malformed(m),
            WireError::Transport(m) => LlmError::Transport(m),
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, exchange: &ChatExchange) -> Result<String, LlmError>;
}
