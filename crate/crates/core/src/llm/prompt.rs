use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use thiserror::Error;

use super::{ChatExchange, ChatMessage, ChatParams, Role};
use crate::text::render_placeholders;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt `{id}` line {line}: {message}")]
    Syntax { id: String, line: usize, message: String },
    #[error("prompt `{id}`: unresolved placeholder `{{{key}}}`")]
    Unresolved { id: String, key: String },
    #[error("unknown prompt template `{0}`")]
    Unknown(String),
    #[error("reading prompts: {0}")]
    Io(#[from] std::io::Error),
}

/// Role-tagged message templates with `{placeholder}` slots.
///
/// File layout: `param: value` lines (`temperature`, `max_tokens`), a `---`
/// line, then message blocks each opened by `@system`, `@user` or
/// `@assistant` on its own line.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: String,
    pub params: ChatParams,
    pub messages: Vec<(Role, String)>,
}

impl PromptTemplate {
    pub fn parse(id: &str, text: &str) -> Result<Self, PromptError> {
        let err = |line: usize, message: String| PromptError::Syntax {
            id: id.to_string(),
            line,
            message,
        };
        let mut params = ChatParams::default();
        let mut lines = text.lines().enumerate();
        let mut saw_separator = false;
        for (idx, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "---" {
                saw_separator = true;
                break;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(idx + 1, format!("expected `param: value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "temperature" => {
                    params.temperature = value
                        .parse()
                        .map_err(|_| err(idx + 1, format!("bad temperature `{value}`")))?
                }
                "max_tokens" => {
                    params.max_tokens = value
                        .parse()
                        .map_err(|_| err(idx + 1, format!("bad max_tokens `{value}`")))?
                }
                other => return Err(err(idx + 1, format!("unknown parameter `{other}`"))),
            }
        }
        if !saw_separator {
            return Err(err(text.lines().count().max(1), "missing `---` separator".into()));
        }

        let mut messages: Vec<(Role, String)> = Vec::new();
        for (idx, line) in lines {
            let role = match line.trim() {
                "@system" => Some(Role::System),
                "@user" => Some(Role::User),
                "@assistant" => Some(Role::Assistant),
                _ => None,
            };
            match (role, messages.last_mut()) {
                (Some(role), _) => messages.push((role, String::new())),
                (None, Some((_, body))) => {
                    body.push_str(line);
                    body.push('\n');
                }
                (None, None) if line.trim().is_empty() => {}
                (None, None) => return Err(err(idx + 1, "text before the first message block".into())),
            }
        }
        for (_, body) in &mut messages {
            *body = body.trim().to_string();
        }
        match messages.first() {
            None => return Err(err(1, "no message blocks".into())),
            Some((role, _)) if *role != Role::System => {
                return Err(err(1, "first message block must be @system".into()))
            }
            _ => {}
        }
        Ok(PromptTemplate {
            id: id.to_string(),
            params,
            messages,
        })
    }

    pub fn render(&self, vars: &BTreeMap<String, String>) -> Result<ChatExchange, PromptError> {
        let messages = self
            .messages
            .iter()
            .map(|(role, body)| {
                render_placeholders(body, |k| vars.get(k).cloned())
                    .map(|content| ChatMessage::new(*role, content))
                    .map_err(|key| PromptError::Unresolved {
                        id: self.id.clone(),
                        key,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChatExchange {
            prompt_id: self.id.clone(),
            messages,
            params: self.params,
            vars: vars.clone(),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct PromptLibrary {
    templates: HashMap<String, PromptTemplate>,
}

impl PromptLibrary {
    /// Loads every `*.prompt` file; the file stem is the template id.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut library = PromptLibrary::default();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("prompt") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let text = std::fs::read_to_string(&path)?;
            library.insert(PromptTemplate::parse(&id, &text)?);
        }
        Ok(library)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates.get(id).ok_or_else(|| PromptError::Unknown(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn render(&self, id: &str, vars: &BTreeMap<String, String>) -> Result<ChatExchange, PromptError> {
        self.get(id)?.render(vars)
    }
}
