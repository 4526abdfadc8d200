//! Theme decision and the final two-spot plan.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::llm::{ChatBackend, PromptLibrary};
use crate::nlu::{SentimentScore, YesNoLabel, YesNoResult};
use crate::spotdb::{SpotCatalog, Theme};

pub const PLAN_SIZE: usize = 2;

/// Prompt id of the optional rewording pass over the rationale.
pub const REASON_PROMPT: &str = "plan_reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReasonSource {
    YesAnswer,
    SentimentRank,
    DesiredOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub source: ReasonSource,
    /// Absent for a desired spot that was never introduced.
    pub sentiment: Option<f64>,
    pub label: Option<YesNoLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Selection order: the desired spot or the strongest candidate first.
    pub spots: Vec<String>,
    pub evidence: Vec<Evidence>,
    pub rationale_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSpotExport {
    pub id: String,
    pub name: String,
    pub reason_source: ReasonSource,
}

/// The plan as exported to clients and transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub spots: Vec<PlanSpotExport>,
    pub rationale_text: String,
}

impl Plan {
    pub fn export(&self, catalog: &SpotCatalog) -> PlanExport {
        PlanExport {
            spots: self
                .spots
                .iter()
                .zip(&self.evidence)
                .map(|(id, ev)| PlanSpotExport {
                    id: id.clone(),
                    name: catalog.get(id).map_or_else(|| id.clone(), |s| s.name.clone()),
                    reason_source: ev.source,
                })
                .collect(),
            rationale_text: self.rationale_text.clone(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("no interest answer recorded for introduced spot `{0}`")]
    MissingAnswer(String),
    #[error("only {0} distinct candidate spot(s); a plan needs {PLAN_SIZE}")]
    TooFewCandidates(usize),
}

/// Picks the theme: the desired spot's theme when known, else the probed
/// theme answered Yes with the highest sentiment (ties in History, Nature,
/// Others order), else Others.
pub fn determine_theme(desired_theme: Option<Theme>, probes: &BTreeMap<Theme, (YesNoResult, SentimentScore)>) -> Theme {
    if let Some(theme) = desired_theme {
        return theme;
    }
    let mut best: Option<(Theme, f64)> = None;
    for theme in Theme::ALL {
        if let Some((answer, sentiment)) = probes.get(&theme) {
            if answer.label == YesNoLabel::Yes && best.is_none_or(|(_, s)| sentiment.value > s) {
                best = Some((theme, sentiment.value));
            }
        }
    }
    best.map_or(Theme::Others, |(theme, _)| theme)
}

fn label_rank(label: YesNoLabel) -> u8 {
    match label {
        YesNoLabel::Yes => 0,
        YesNoLabel::Other => 1,
        YesNoLabel::No => 2,
    }
}

/// Chooses the two plan spots.
///
/// A desired spot takes slot 1 whether or not it was introduced. Remaining
/// slots go to Yes-answered spots by sentiment (descending, ties by id),
/// then to the rest with Other ranked above No, again by sentiment.
/// `rationale_text` is left empty; see [`render_recommendation_reason`].
pub fn build_plan(
    introduced: &[String],
    answers: &BTreeMap<String, YesNoResult>,
    sentiments: &BTreeMap<String, SentimentScore>,
    desired: Option<&str>,
) -> Result<Plan, PlanError> {
    let mut candidates = Vec::with_capacity(introduced.len());
    let mut seen = BTreeSet::new();
    for id in introduced {
        if !seen.insert(id.as_str()) || Some(id.as_str()) == desired {
            continue;
        }
        let answer = answers.get(id).ok_or_else(|| PlanError::MissingAnswer(id.clone()))?;
        let sentiment = sentiments.get(id).map_or(0.0, |s| s.value);
        candidates.push((id, answer.label, sentiment));
    }
    candidates.sort_by(|a, b| {
        label_rank(a.1)
            .cmp(&label_rank(b.1))
            .then_with(|| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
            .then_with(|| a.0.cmp(b.0))
    });

    let mut plan = Plan {
        spots: Vec::with_capacity(PLAN_SIZE),
        evidence: Vec::with_capacity(PLAN_SIZE),
        rationale_text: String::new(),
    };
    if let Some(desired) = desired {
        plan.spots.push(desired.to_string());
        plan.evidence.push(Evidence {
            source: ReasonSource::DesiredOverride,
            sentiment: sentiments.get(desired).map(|s| s.value),
            label: answers.get(desired).map(|a| a.label),
        });
    }
    for (id, label, sentiment) in candidates {
        if plan.spots.len() == PLAN_SIZE {
            break;
        }
        plan.spots.push(id.clone());
        plan.evidence.push(Evidence {
            source: if label == YesNoLabel::Yes {
                ReasonSource::YesAnswer
            } else {
                ReasonSource::SentimentRank
            },
            sentiment: Some(sentiment),
            label: Some(label),
        });
    }
    if plan.spots.len() < PLAN_SIZE {
        return Err(PlanError::TooFewCandidates(plan.spots.len()));
    }
    Ok(plan)
}

/// What the icebreaker taught us about the user, by display name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IcebreakerFacts {
    pub visited: Vec<String>,
    pub theme: Option<Theme>,
}

/// Template rationale; always names both plan spots.
pub fn recommendation_reason(plan: &Plan, catalog: &SpotCatalog, facts: &IcebreakerFacts) -> String {
    let name = |i: usize| {
        catalog
            .get(&plan.spots[i])
            .map_or_else(|| plan.spots[i].clone(), |s| s.name.clone())
    };
    let (first, second) = (name(0), name(1));
    let mut parts = vec![format!("I recommend visiting {first} and then {second}.")];
    for (i, spot) in [&first, &second].into_iter().enumerate() {
        parts.push(match plan.evidence[i].source {
            ReasonSource::DesiredOverride => format!("{spot} is the place you most wanted to see."),
            ReasonSource::YesAnswer => format!("You told me {spot} sounded interesting."),
            ReasonSource::SentimentRank => {
                format!("{spot} seemed to appeal to you more than the other options.")
            }
        });
    }
    if !facts.visited.is_empty() {
        parts.push(format!(
            "Since you have already been to {}, I picked places that will be new to you.",
            facts.visited.join(" and ")
        ));
    }
    if let Some(theme) = facts.theme {
        parts.push(format!("Both fit your interest in {}.", theme.describe()));
    }
    parts.join(" ")
}

/// Template rationale, optionally reworded by the LLM. The rewording is
/// kept only if it still names both spots; any failure keeps the template.
pub fn render_recommendation_reason(
    plan: &Plan,
    catalog: &SpotCatalog,
    facts: &IcebreakerFacts,
    polish: Option<(&dyn ChatBackend, &PromptLibrary)>,
) -> String {
    let reason = recommendation_reason(plan, catalog, facts);
    let Some((llm, prompts)) = polish else {
        return reason;
    };
    let names: Vec<String> = plan
        .spots
        .iter()
        .map(|id| catalog.get(id).map_or_else(|| id.clone(), |s| s.name.clone()))
        .collect();
    let vars = BTreeMap::from([
        ("reason".to_string(), reason.clone()),
        ("spot_a".to_string(), names[0].clone()),
        ("spot_b".to_string(), names[1].clone()),
    ]);
    let polished = prompts
        .render(REASON_PROMPT, &vars)
        .map_err(|e| e.to_string())
        .and_then(|exchange| llm.chat(&exchange).map_err(|e| e.to_string()));
    match polished {
        Ok(text) if names.iter().all(|n| text.contains(n.as_str())) => text,
        Ok(_) => {
            warn!("reworded plan reason dropped a spot name; keeping the template");
            reason
        }
        Err(err) => {
            warn!(%err, "plan reason rewording failed; keeping the template");
            reason
        }
    }
}
