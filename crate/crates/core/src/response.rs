//! Chooses between the hand-written state utterance and LLM generation, and
//! hosts the other LLM-backed helpers: spot explanations and desired-spot
//! extraction.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::llm::{ChatBackend, PromptLibrary};
use crate::scenario::State;
use crate::spotdb::{Spot, SpotCatalog};
use crate::text::padded_tokens;

/// Prompt used by states that do not name their own.
pub const DEFAULT_PROMPT: &str = "respond";
pub const EXPLAIN_PROMPT: &str = "spot_explanation";
pub const EXTRACT_PROMPT: &str = "extract_desired";
/// Number of most recent turns shown to the LLM.
pub const HISTORY_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseSource {
    Rule,
    Llm,
}

impl fmt::Display for ResponseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseSource::Rule => "Rule",
            ResponseSource::Llm => "Llm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemUtterance {
    pub text: String,
    pub source: ResponseSource,
}

/// Everything `respond` needs about the turn. Templates are rendered by the
/// caller, which owns the session frame.
pub struct ResponseRequest<'a> {
    pub state: &'a State,
    pub matched: Option<&'a str>,
    pub rule_text: &'a str,
    pub fallback_text: &'a str,
    /// Prompt variables; `next_question` is added from `rule_text`.
    pub vars: BTreeMap<String, String>,
}

#[derive(Clone)]
pub struct ResponsePolicy {
    llm: Arc<dyn ChatBackend>,
    prompts: Arc<PromptLibrary>,
}

impl ResponsePolicy {
    pub fn new(llm: Arc<dyn ChatBackend>, prompts: Arc<PromptLibrary>) -> Self {
        ResponsePolicy { llm, prompts }
    }

    pub fn llm(&self) -> &dyn ChatBackend {
        self.llm.as_ref()
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    /// Renders `prompt_id` and asks the LLM. Blank completions count as
    /// failures so callers can always fall back.
    pub fn generate(&self, prompt_id: &str, vars: &BTreeMap<String, String>) -> Result<String, String> {
        let exchange = self.prompts.render(prompt_id, vars).map_err(|e| e.to_string())?;
        let text = self.llm.chat(&exchange).map_err(|e| e.to_string())?;
        let text = text.trim();
        if text.is_empty() {
            return Err(format!("empty completion for prompt `{prompt_id}`"));
        }
        Ok(text.to_string())
    }

    /// Rule text when a candidate pattern matched; LLM text otherwise, with
    /// the state's fallback text (marked Rule) if generation fails.
    pub fn respond(&self, request: ResponseRequest<'_>) -> SystemUtterance {
        let rule = |text: &str| SystemUtterance {
            text: if text.trim().is_empty() {
                request.fallback_text.to_string()
            } else {
                text.to_string()
            },
            source: ResponseSource::Rule,
        };
        if request.matched.is_some() {
            return rule(request.rule_text);
        }
        let prompt_id = request.state.llm_prompt.as_deref().unwrap_or(DEFAULT_PROMPT);
        let mut vars = request.vars;
        vars.insert("next_question".into(), request.rule_text.to_string());
        match self.generate(prompt_id, &vars) {
            Ok(text) => SystemUtterance {
                text,
                source: ResponseSource::Llm,
            },
            Err(err) => {
                warn!(state = %request.state.id, %err, "LLM response failed; using fallback text");
                rule(request.fallback_text)
            }
        }
    }

    /// LLM explanation of a spot grounded in its catalog description; the
    /// description itself when generation fails.
    pub fn explain_spot(&self, spot: &Spot) -> String {
        let vars = BTreeMap::from([
            ("spot_name".to_string(), spot.name.clone()),
            ("description".to_string(), spot.description.clone()),
        ]);
        self.generate(EXPLAIN_PROMPT, &vars).unwrap_or_else(|err| {
            warn!(spot = %spot.id, %err, "spot explanation failed; using the description");
            spot.description.clone()
        })
    }

    /// The spot the user most wants to visit.
    ///
    /// If exactly one catalog name occurs in the utterance it is returned
    /// without asking the LLM. Otherwise the LLM picks one name from the
    /// mentioned spots (or the whole catalog when none is mentioned) and its
    /// answer is resolved with [`resolve_spot_name`].
    pub fn extract_desired_spot(&self, utterance: &str, catalog: &SpotCatalog) -> Option<String> {
        let mentions = catalog.mentions(utterance);
        if mentions.len() == 1 {
            return Some(mentions[0].spot.id.clone());
        }
        let candidates: Vec<&str> = if mentions.is_empty() {
            catalog.spots().iter().map(|s| s.name.as_str()).collect()
        } else {
            mentions.iter().map(|m| m.spot.name.as_str()).collect()
        };
        let vars = BTreeMap::from([
            ("utterance".to_string(), utterance.to_string()),
            ("candidates".to_string(), candidates.join("\n")),
        ]);
        match self.generate(EXTRACT_PROMPT, &vars) {
            Ok(answer) => {
                let found = resolve_spot_name(&answer, catalog).map(|s| s.id.clone());
                debug!(%answer, ?found, "desired-spot extraction");
                found
            }
            Err(err) => {
                warn!(%err, "desired-spot extraction failed");
                None
            }
        }
    }
}

/// Maps free LLM text to a catalog spot: exact match after normalization,
/// else the longest catalog name contained in the text.
pub fn resolve_spot_name<'a>(answer: &str, catalog: &'a SpotCatalog) -> Option<&'a Spot> {
    let normalized = padded_tokens(answer);
    if normalized.trim().is_empty() {
        return None;
    }
    if let Some(spot) = catalog.spots().iter().find(|s| padded_tokens(&s.name) == normalized) {
        return Some(spot);
    }
    catalog
        .spots()
        .iter()
        .filter(|s| normalized.contains(&padded_tokens(&s.name)))
        .max_by(|a, b| {
            padded_tokens(&a.name)
                .len()
                .cmp(&padded_tokens(&b.name).len())
                .then_with(|| b.id.cmp(&a.id))
        })
}

/// Deterministic desired-spot guess for turns where the LLM may not be
/// called: the most often named spot, ties going to the earliest mention.
pub fn most_mentioned_spot(utterance: &str, catalog: &SpotCatalog) -> Option<String> {
    catalog
        .mentions(utterance)
        .into_iter()
        .max_by(|a, b| a.count.cmp(&b.count).then_with(|| b.first_offset.cmp(&a.first_offset)))
        .map(|m| m.spot.id.clone())
}

/// Formats the last `window` (user, system) exchanges for a prompt.
pub fn format_history(turns: &[(String, String)], window: usize) -> String {
    let start = turns.len().saturating_sub(window);
    let lines: Vec<String> = turns[start..]
        .iter()
        .map(|(user, system)| format!("User: {user}\nGuide: {system}"))
        .collect();
    if lines.is_empty() {
        "(no previous turns)".to_string()
    } else {
        lines.join("\n")
    }
}
