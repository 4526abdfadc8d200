//! Data-defined state-transition network that scripts a dialogue.
//!
//! A scenario file keeps states, transition guards and candidate user
//! utterances out of the code. See [`parse_scenario`] for the format.

mod condition;
mod parse;
mod pattern;
mod validate;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use condition::{compile_condition, Condition, ConditionError, Signals};
pub use parse::{parse_scenario, ScenarioError};
pub use pattern::Pattern;
pub use validate::{validate, Finding, ValidationReport};

use crate::spotdb::Theme;

/// The four stages of the tourist dialogue, in the order they occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Icebreaker,
    ThemeDetermination,
    SpotIntroduction,
    PlanProposal,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Icebreaker,
        Phase::ThemeDetermination,
        Phase::SpotIntroduction,
        Phase::PlanProposal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Icebreaker => "Icebreaker",
            Phase::ThemeDetermination => "ThemeDetermination",
            Phase::SpotIntroduction => "SpotIntroduction",
            Phase::PlanProposal => "PlanProposal",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or(())
    }
}

/// Side effects a state runs when it is entered. The vocabulary is fixed by
/// the engine; scenarios refer to actions by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Add every catalog spot named in the utterance to the visited set.
    RecordVisited,
    /// Extract the single most wanted spot from the utterance.
    RecordDesired,
    /// Store this turn's yes/no result and sentiment against introduced spot N (1-based).
    RecordInterest(usize),
    SetTheme(Theme),
    /// Store this turn's yes/no result and sentiment as the answer to a theme probe.
    RecordThemeProbe(Theme),
    /// Decide the theme from the desired spot or the recorded probes.
    DecideTheme,
    /// Select the three spots to introduce for the current theme.
    SelectSpots,
    /// Introduce selected spot N and make it the spot under discussion.
    FocusSpot(usize),
    /// Build the two-spot plan and its recommendation reason.
    MarkPlanReady,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::RecordVisited => f.write_str("record_visited"),
            Action::RecordDesired => f.write_str("record_desired"),
            Action::RecordInterest(n) => write!(f, "record_interest({n})"),
            Action::SetTheme(t) => write!(f, "set_theme({t})"),
            Action::RecordThemeProbe(t) => write!(f, "record_theme_probe({t})"),
            Action::DecideTheme => f.write_str("decide_theme"),
            Action::SelectSpots => f.write_str("select_spots"),
            Action::FocusSpot(n) => write!(f, "focus_spot({n})"),
            Action::MarkPlanReady => f.write_str("mark_plan_ready"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, arg) = match s.split_once('(') {
            Some((name, rest)) => {
                let arg = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unclosed argument in action `{s}`"))?;
                (name.trim(), Some(arg.trim()))
            }
            None => (s, None),
        };
        let slot = |arg: Option<&str>| -> Result<usize, String> {
            let n: usize = arg
                .ok_or_else(|| format!("action `{name}` needs a spot slot"))?
                .parse()
                .map_err(|_| format!("bad spot slot in `{s}`"))?;
            if n == 0 {
                return Err(format!("spot slots are 1-based in `{s}`"));
            }
            Ok(n)
        };
        let theme = |arg: Option<&str>| -> Result<Theme, String> {
            arg.ok_or_else(|| format!("action `{name}` needs a theme"))?
                .parse()
                .map_err(|_| format!("unknown theme in `{s}`"))
        };
        let no_arg = |action: Action| -> Result<Action, String> {
            match arg {
                None => Ok(action),
                Some(_) => Err(format!("action `{name}` takes no argument")),
            }
        };
        match name {
            "record_visited" => no_arg(Action::RecordVisited),
            "record_desired" => no_arg(Action::RecordDesired),
            "decide_theme" => no_arg(Action::DecideTheme),
            "select_spots" => no_arg(Action::SelectSpots),
            "mark_plan_ready" => no_arg(Action::MarkPlanReady),
            "record_interest" => Ok(Action::RecordInterest(slot(arg)?)),
            "focus_spot" => Ok(Action::FocusSpot(slot(arg)?)),
            "set_theme" => Ok(Action::SetTheme(theme(arg)?)),
            "record_theme_probe" => Ok(Action::RecordThemeProbe(theme(arg)?)),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub priority: u32,
    pub condition: Condition,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub phase: Phase,
    pub template: String,
    /// Kept sorted by ascending priority.
    pub transitions: Vec<Transition>,
    pub actions: Vec<Action>,
    /// Prompt used when the user utterance matched no candidate pattern.
    pub llm_prompt: Option<String>,
    /// Rule text used when the LLM is unavailable. Defaults to `template`.
    pub fallback: Option<String>,
}

impl State {
    pub fn is_terminal(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn fallback_template(&self) -> &str {
        self.fallback.as_deref().unwrap_or(&self.template)
    }

    /// Pattern sets named by `matches(..)` guards, in priority order.
    pub fn referenced_pattern_sets(&self) -> impl Iterator<Item = &str> {
        let mut seen: Vec<&str> = Vec::new();
        self.transitions.iter().filter_map(move |t| match &t.condition {
            Condition::Matches(set) if !seen.contains(&set.as_str()) => {
                seen.push(set.as_str());
                Some(set.as_str())
            }
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub states: IndexMap<String, State>,
    pub pattern_sets: IndexMap<String, Vec<Pattern>>,
    pub initial_state: String,
    pub metadata: IndexMap<String, String>,
}

impl Scenario {
    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.get(id)
    }

    pub fn initial(&self) -> &State {
        &self.states[&self.initial_state]
    }

    /// First pattern set (in the state's guard order) with a pattern that
    /// matches the utterance.
    pub fn match_patterns<'a>(&'a self, state: &'a State, utterance: &str) -> Option<&'a str> {
        state.referenced_pattern_sets().find(|set| {
            self.pattern_sets
                .get(*set)
                .is_some_and(|patterns| patterns.iter().any(|p| p.matches(utterance)))
        })
    }

    /// Writes the scenario back to the tab-separated file format.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        if !self.metadata.is_empty() {
            out.push_str("[meta]\n");
            for (k, v) in &self.metadata {
                out.push_str(&format!("{k}\t{v}\n"));
            }
            out.push('\n');
        }
        out.push_str("[states]\n");
        // The initial state is always the first state row.
        let ordered = std::iter::once(self.initial())
            .chain(self.states.values().filter(|s| s.id != self.initial_state));
        for state in ordered {
            let actions: Vec<String> = state.actions.iter().map(ToString::to_string).collect();
            let mut row = vec![
                state.id.clone(),
                state.phase.to_string(),
                state.template.clone(),
                actions.join(", "),
            ];
            match (&state.llm_prompt, &state.fallback) {
                (None, None) => {}
                (prompt, None) => row.push(prompt.clone().unwrap_or_default()),
                (prompt, Some(fb)) => {
                    row.push(prompt.clone().unwrap_or_default());
                    row.push(fb.clone());
                }
            }
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out.push_str("\n[transitions]\n");
        for state in self.states.values() {
            for t in &state.transitions {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", state.id, t.priority, t.condition, t.target));
            }
        }
        out.push_str("\n[patterns]\n");
        for (id, patterns) in &self.pattern_sets {
            for p in patterns {
                out.push_str(&format!("{id}\t{}\n", p.as_str()));
            }
        }
        out
    }
}
