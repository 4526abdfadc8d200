//! Per-session execution of a scenario: the session frame, turn records and
//! the engine that advances a session one user turn at a time.

mod engine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{pick_transition, DialogueEngine, EngineConfig, TurnResult};

use crate::nlu::{AgeBand, NluError, SentimentScore, YesNoResult};
use crate::plan::{Plan, PlanError, PlanExport};
use crate::response::ResponseSource;
use crate::scenario::{Action, Phase};
use crate::spotdb::{SpotError, Theme};

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("session metadata has no age")]
    MissingAge,
    #[error("state `{0}` is terminal; the dialogue has ended")]
    TerminalState(String),
    #[error("state `{0}` is not in the scenario")]
    UnknownState(String),
    #[error("no transition of state `{0}` holds")]
    NoTransition(String),
    #[error("state `{state}`: unresolved placeholder `{{{key}}}`")]
    Placeholder { state: String, key: String },
    #[error("action `{action}`: {detail}")]
    MissingFrameData { action: Action, detail: String },
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Spots(#[from] SpotError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Who the user is, as known when the session starts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub age: Option<u32>,
    pub name: Option<String>,
}

impl SessionMeta {
    pub fn with_age(age: u32) -> Self {
        SessionMeta {
            age: Some(age),
            name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluSignals {
    pub yes_no: YesNoResult,
    pub sentiment: SentimentScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredTransition {
    pub from: String,
    pub priority: u32,
    pub to: String,
}

/// One user turn as written to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based.
    pub turn: usize,
    pub user_utterance: String,
    pub nlu: NluSignals,
    pub matched_pattern_set: Option<String>,
    pub fired_transition: FiredTransition,
    pub system_utterance: String,
    pub response_source: ResponseSource,
    /// Present on the turn that ends the dialogue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanExport>,
}

impl TurnRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("turn records always serialize")
    }
}

/// JSON Lines transcript, one record per line.
pub fn transcript_jsonl(records: &[TurnRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

/// Everything the engine remembers about one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFrame {
    pub session_id: String,
    pub current_state: String,
    pub phase: Phase,
    pub user_age: u32,
    pub user_name: Option<String>,
    pub sentiment_band: AgeBand,
    pub visited_spots: BTreeSet<String>,
    pub desired_spot: Option<String>,
    pub theme: Option<Theme>,
    pub theme_probes: BTreeMap<Theme, (YesNoResult, SentimentScore)>,
    /// Spots chosen for introduction, in order; filled on first use.
    pub selected_spots: Vec<String>,
    pub introduced_spots: Vec<String>,
    /// The spot currently under discussion.
    pub focused_spot: Option<String>,
    pub interest_answers: BTreeMap<String, YesNoResult>,
    pub interest_sentiments: BTreeMap<String, SentimentScore>,
    pub sentiment_history: Vec<SentimentScore>,
    pub turn_count: usize,
    pub transcript: Vec<TurnRecord>,
    pub last_system_utterance: String,
    pub plan: Option<Plan>,
}

impl SessionFrame {
    /// Keys understood by `frame_has(..)` conditions. Unknown keys are
    /// never present.
    pub const KEYS: [&'static str; 6] = ["desired_spot", "theme", "visited_spots", "focused_spot", "plan", "user_name"];

    pub fn has(&self, key: &str) -> bool {
        match key {
            "desired_spot" => self.desired_spot.is_some(),
            "theme" => self.theme.is_some(),
            "visited_spots" => !self.visited_spots.is_empty(),
            "focused_spot" => self.focused_spot.is_some(),
            "plan" => self.plan.is_some(),
            "user_name" => self.user_name.is_some(),
            _ => false,
        }
    }
}
