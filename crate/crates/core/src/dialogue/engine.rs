use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use tracing::{debug, info};

use super::{DialogueError, FiredTransition, NluSignals, SessionFrame, SessionMeta, TurnRecord};
use crate::nlu::{AgeBand, SentimentEstimator, YesNoClassifier, POSITIVE_SENTIMENT};
use crate::plan::{build_plan, determine_theme, render_recommendation_reason, IcebreakerFacts, PlanExport};
use crate::response::{format_history, most_mentioned_spot, ResponsePolicy, ResponseRequest, ResponseSource, HISTORY_WINDOW};
use crate::scenario::{Action, Phase, Scenario, Signals, State, Transition};
use crate::spotdb::{select_introduction_spots, SpotCatalog};
use crate::text::render_placeholders;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Sentiment at or above this reads as "enjoying it" in LLM context.
    pub positive_threshold: f64,
    /// Number of spots `focus_spot` selects from.
    pub introduction_count: usize,
    /// Ask the LLM for spot explanations when the engine is built.
    pub explain_spots: bool,
    /// Let the LLM reword the plan rationale (only on unmatched turns).
    pub polish_reason: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            positive_threshold: POSITIVE_SENTIMENT,
            introduction_count: 3,
            explain_spots: true,
            polish_reason: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnResult {
    pub system_utterance: String,
    pub source: ResponseSource,
    pub phase: Phase,
    pub ended: bool,
    pub plan: Option<PlanExport>,
    pub record: TurnRecord,
}

/// The lowest-priority transition whose condition holds.
pub fn pick_transition<'a>(state: &'a State, signals: &Signals<'_>) -> Option<&'a Transition> {
    state.transitions.iter().find(|t| t.condition.holds(signals))
}

/// Runs scenario sessions against shared, read-only resources.
///
/// LLM calls happen only on turns where the user utterance matched no
/// candidate pattern; on matched turns LLM-backed actions use their
/// deterministic fallbacks. Spot explanations are generated once, here.
pub struct DialogueEngine {
    scenario: Arc<Scenario>,
    catalog: Arc<SpotCatalog>,
    yes_no: Arc<YesNoClassifier>,
    sentiment: Arc<SentimentEstimator>,
    policy: ResponsePolicy,
    config: EngineConfig,
    explanations: HashMap<String, String>,
}

impl DialogueEngine {
    pub fn new(
        scenario: Arc<Scenario>,
        catalog: Arc<SpotCatalog>,
        yes_no: Arc<YesNoClassifier>,
        sentiment: Arc<SentimentEstimator>,
        policy: ResponsePolicy,
        config: EngineConfig,
    ) -> Self {
        let explanations = catalog
            .spots()
            .iter()
            .map(|spot| {
                let text = if config.explain_spots {
                    policy.explain_spot(spot)
                } else {
                    spot.description.clone()
                };
                (spot.id.clone(), text)
            })
            .collect();
        info!(states = scenario.states.len(), spots = catalog.len(), "dialogue engine ready");
        DialogueEngine {
            scenario,
            catalog,
            yes_no,
            sentiment,
            policy,
            config,
            explanations,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn catalog(&self) -> &SpotCatalog {
        &self.catalog
    }

    pub fn policy(&self) -> &ResponsePolicy {
        &self.policy
    }

    pub fn explanation(&self, spot_id: &str) -> Option<&str> {
        self.explanations.get(spot_id).map(String::as_str)
    }

    /// Starts a session at the initial state and returns the opening line.
    pub fn create_session(&self, session_id: impl Into<String>, meta: &SessionMeta) -> Result<(SessionFrame, String), DialogueError> {
        let age = meta.age.ok_or(DialogueError::MissingAge)?;
        let initial = self.scenario.initial();
        let mut frame = SessionFrame {
            session_id: session_id.into(),
            current_state: initial.id.clone(),
            phase: initial.phase,
            user_age: age,
            user_name: meta.name.clone().filter(|n| !n.trim().is_empty()),
            sentiment_band: AgeBand::from_age(age),
            visited_spots: BTreeSet::new(),
            desired_spot: None,
            theme: None,
            theme_probes: BTreeMap::new(),
            selected_spots: Vec::new(),
            introduced_spots: Vec::new(),
            focused_spot: None,
            interest_answers: BTreeMap::new(),
            interest_sentiments: BTreeMap::new(),
            sentiment_history: Vec::new(),
            turn_count: 0,
            transcript: Vec::new(),
            last_system_utterance: String::new(),
            plan: None,
        };
        let opening = self.render(initial, &initial.template, &frame)?;
        frame.last_system_utterance = opening.clone();
        Ok((frame, opening))
    }

    /// Processes one user utterance. On error the frame is left untouched.
    pub fn advance(&self, frame: &mut SessionFrame, utterance: &str) -> Result<TurnResult, DialogueError> {
        let state = self
            .scenario
            .state(&frame.current_state)
            .ok_or_else(|| DialogueError::UnknownState(frame.current_state.clone()))?;
        if state.is_terminal() {
            return Err(DialogueError::TerminalState(state.id.clone()));
        }

        let matched = self.scenario.match_patterns(state, utterance);
        let yes_no = self.yes_no.classify(&frame.last_system_utterance, utterance);
        let sentiment = self.sentiment.estimate(utterance, frame.user_age)?;
        let frame_has = |key: &str| frame.has(key);
        let signals = Signals {
            matched,
            yes_no: yes_no.label,
            sentiment: sentiment.value,
            frame_has: &frame_has,
        };
        let transition = pick_transition(state, &signals).ok_or_else(|| DialogueError::NoTransition(state.id.clone()))?;
        let target = self
            .scenario
            .state(&transition.target)
            .ok_or_else(|| DialogueError::UnknownState(transition.target.clone()))?;
        debug!(from = %state.id, to = %target.id, ?matched, yes_no = %yes_no.label, sentiment = sentiment.value, "transition");

        let mut next = frame.clone();
        next.sentiment_history.push(sentiment);
        next.current_state = target.id.clone();
        next.phase = target.phase;
        let nlu = NluSignals { yes_no, sentiment };
        for action in &target.actions {
            self.run_action(&mut next, action, utterance, matched.is_some(), &nlu)?;
        }

        let rule_text = self.render(target, &target.template, &next)?;
        let fallback_text = self.render(target, target.fallback_template(), &next)?;
        let reply = self.policy.respond(ResponseRequest {
            state: target,
            matched,
            rule_text: &rule_text,
            fallback_text: &fallback_text,
            vars: self.prompt_vars(&next, utterance),
        });

        let ended = target.is_terminal();
        let plan = if ended {
            next.plan.as_ref().map(|p| p.export(&self.catalog))
        } else {
            None
        };
        next.turn_count += 1;
        let record = TurnRecord {
            turn: next.turn_count,
            user_utterance: utterance.to_string(),
            nlu,
            matched_pattern_set: matched.map(String::from),
            fired_transition: FiredTransition {
                from: state.id.clone(),
                priority: transition.priority,
                to: target.id.clone(),
            },
            system_utterance: reply.text.clone(),
            response_source: reply.source,
            plan: plan.clone(),
        };
        next.transcript.push(record.clone());
        next.last_system_utterance = reply.text.clone();
        *frame = next;
        Ok(TurnResult {
            system_utterance: reply.text,
            source: reply.source,
            phase: target.phase,
            ended,
            plan,
            record,
        })
    }

    fn run_action(
        &self,
        frame: &mut SessionFrame,
        action: &Action,
        utterance: &str,
        matched: bool,
        nlu: &NluSignals,
    ) -> Result<(), DialogueError> {
        let missing = |detail: String| DialogueError::MissingFrameData {
            action: action.clone(),
            detail,
        };
        match action {
            Action::RecordVisited => {
                for mention in self.catalog.mentions(utterance) {
                    frame.visited_spots.insert(mention.spot.id.clone());
                }
            }
            Action::RecordDesired => {
                let desired = if matched {
                    most_mentioned_spot(utterance, &self.catalog)
                } else {
                    self.policy.extract_desired_spot(utterance, &self.catalog)
                };
                if desired.is_some() {
                    frame.desired_spot = desired;
                }
            }
            Action::RecordInterest(slot) => {
                let spot = frame
                    .introduced_spots
                    .get(slot - 1)
                    .cloned()
                    .ok_or_else(|| missing(format!("only {} spot(s) introduced", frame.introduced_spots.len())))?;
                frame.interest_answers.insert(spot.clone(), nlu.yes_no);
                frame.interest_sentiments.insert(spot, nlu.sentiment);
            }
            Action::SetTheme(theme) => frame.theme = Some(*theme),
            Action::RecordThemeProbe(theme) => {
                frame.theme_probes.insert(*theme, (nlu.yes_no, nlu.sentiment));
            }
            Action::DecideTheme => {
                let desired_theme = frame
                    .desired_spot
                    .as_deref()
                    .and_then(|id| self.catalog.get(id))
                    .map(|s| s.theme);
                frame.theme = Some(determine_theme(desired_theme, &frame.theme_probes));
            }
            Action::SelectSpots => self.select_spots(frame, action)?,
            Action::FocusSpot(slot) => {
                if frame.selected_spots.is_empty() {
                    self.select_spots(frame, action)?;
                }
                let spot = frame
                    .selected_spots
                    .get(slot - 1)
                    .cloned()
                    .ok_or_else(|| missing(format!("only {} spot(s) selected", frame.selected_spots.len())))?;
                if !frame.introduced_spots.contains(&spot) {
                    frame.introduced_spots.push(spot.clone());
                }
                frame.focused_spot = Some(spot);
            }
            Action::MarkPlanReady => {
                let mut plan = build_plan(
                    &frame.introduced_spots,
                    &frame.interest_answers,
                    &frame.interest_sentiments,
                    frame.desired_spot.as_deref(),
                )?;
                let facts = IcebreakerFacts {
                    visited: frame
                        .visited_spots
                        .iter()
                        .filter_map(|id| self.catalog.get(id))
                        .map(|s| s.name.clone())
                        .collect(),
                    theme: frame.theme,
                };
                let polish = (self.config.polish_reason && !matched).then(|| (self.policy.llm(), self.policy.prompts()));
                plan.rationale_text = render_recommendation_reason(&plan, &self.catalog, &facts, polish);
                frame.plan = Some(plan);
            }
        }
        Ok(())
    }

    fn select_spots(&self, frame: &mut SessionFrame, action: &Action) -> Result<(), DialogueError> {
        let theme = frame.theme.ok_or_else(|| DialogueError::MissingFrameData {
            action: action.clone(),
            detail: "no theme decided yet".into(),
        })?;
        let visited: HashSet<String> = frame.visited_spots.iter().cloned().collect();
        frame.selected_spots = select_introduction_spots(
            &self.catalog,
            theme,
            &visited,
            frame.desired_spot.as_deref(),
            self.config.introduction_count,
        )?
        .into_iter()
        .map(|s| s.id.clone())
        .collect();
        Ok(())
    }

    fn spot_name(&self, id: &str) -> String {
        self.catalog.get(id).map_or_else(|| id.to_string(), |s| s.name.clone())
    }

    /// Value of a `{key}` placeholder, if the frame can supply it.
    fn lookup(&self, frame: &SessionFrame, key: &str) -> Option<String> {
        let focused = frame.focused_spot.as_deref().and_then(|id| self.catalog.get(id));
        let plan_spot = |i: usize| frame.plan.as_ref().map(|p| self.spot_name(&p.spots[i]));
        match key {
            "name" => Some(frame.user_name.clone().unwrap_or_else(|| "there".into())),
            "age" => Some(frame.user_age.to_string()),
            "theme" => frame.theme.map(|t| t.describe().to_string()),
            "desired_spot" => frame.desired_spot.as_deref().map(|id| self.spot_name(id)),
            "visited_spots" => Some(if frame.visited_spots.is_empty() {
                "none".into()
            } else {
                frame.visited_spots.iter().map(|id| self.spot_name(id)).collect::<Vec<_>>().join(", ")
            }),
            "spot_name" => focused.map(|s| s.name.clone()),
            "spot_genre" => focused.map(|s| s.genre.clone()),
            "spot_description" => focused.map(|s| s.description.clone()),
            "spot_explanation" => focused.and_then(|s| self.explanation(&s.id)).map(String::from),
            "spot_index" => Some(frame.introduced_spots.len().to_string()),
            "plan_spot_1" => plan_spot(0),
            "plan_spot_2" => plan_spot(1),
            "plan_reason" => frame.plan.as_ref().map(|p| p.rationale_text.clone()),
            _ => None,
        }
    }

    fn render(&self, state: &State, template: &str, frame: &SessionFrame) -> Result<String, DialogueError> {
        render_placeholders(template, |key| self.lookup(frame, key)).map_err(|key| DialogueError::Placeholder {
            state: state.id.clone(),
            key,
        })
    }

    fn frame_summary(&self, frame: &SessionFrame) -> String {
        let mut parts = vec![format!("User age: {}.", frame.user_age)];
        if let Some(name) = &frame.user_name {
            parts.push(format!("Name: {name}."));
        }
        if !frame.visited_spots.is_empty() {
            parts.push(format!("Already visited: {}.", self.lookup(frame, "visited_spots").unwrap_or_default()));
        }
        if let Some(id) = &frame.desired_spot {
            parts.push(format!("Most wants to visit: {}.", self.spot_name(id)));
        }
        if let Some(theme) = frame.theme {
            parts.push(format!("Trip theme: {}.", theme.describe()));
        }
        if let Some(id) = &frame.focused_spot {
            parts.push(format!("Spot under discussion: {}.", self.spot_name(id)));
        }
        if let Some(last) = frame.sentiment_history.last() {
            let mood = if last.value >= self.config.positive_threshold {
                "enjoying the conversation"
            } else {
                "not especially engaged"
            };
            parts.push(format!("The user seems {mood}."));
        }
        parts.join(" ")
    }

    fn prompt_vars(&self, frame: &SessionFrame, utterance: &str) -> BTreeMap<String, String> {
        let history: Vec<(String, String)> = frame
            .transcript
            .iter()
            .map(|r| (r.user_utterance.clone(), r.system_utterance.clone()))
            .collect();
        let mut vars = BTreeMap::from([
            ("user_utterance".to_string(), utterance.to_string()),
            ("last_system_utterance".to_string(), frame.last_system_utterance.clone()),
            ("history".to_string(), format_history(&history, HISTORY_WINDOW)),
            ("frame_summary".to_string(), self.frame_summary(frame)),
            ("spot_name".to_string(), String::new()),
            ("description".to_string(), String::new()),
        ]);
        for key in [
            "name",
            "theme",
            "desired_spot",
            "visited_spots",
            "spot_name",
            "spot_genre",
            "spot_explanation",
            "plan_spot_1",
            "plan_spot_2",
            "plan_reason",
        ] {
            if let Some(value) = self.lookup(frame, key) {
                vars.insert(key.to_string(), value);
            }
        }
        if let Some(description) = self.lookup(frame, "spot_description") {
            vars.insert("description".to_string(), description);
        }
        vars
    }
}
