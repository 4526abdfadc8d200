use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use super::{Condition, Scenario};

/// One problem found in a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    Unreachable { state: String },
    DanglingTarget { from: String, priority: u32, target: String },
    MissingDefault { state: String },
    DuplicateDefault { state: String },
    DuplicatePriority { state: String, priority: u32 },
    UnknownPatternSet { state: String, set: String },
    UnreferencedPatternSet { set: String },
    /// A transition listed after a `default` guard can never fire.
    Shadowed { state: String, priority: u32, default_priority: u32 },
    /// The state has neither an utterance template nor a fallback text.
    MissingFallback { state: String },
    NoTerminal,
}

impl Finding {
    pub fn kind(&self) -> &'static str {
        match self {
            Finding::Unreachable { .. } => "UNREACHABLE",
            Finding::DanglingTarget { .. } => "DANGLING_TARGET",
            Finding::MissingDefault { .. } => "MISSING_DEFAULT",
            Finding::DuplicateDefault { .. } => "DUPLICATE_DEFAULT",
            Finding::DuplicatePriority { .. } => "DUPLICATE_PRIORITY",
            Finding::UnknownPatternSet { .. } => "UNKNOWN_PATTERN_SET",
            Finding::UnreferencedPatternSet { .. } => "UNREFERENCED_PATTERN_SET",
            Finding::Shadowed { .. } => "SHADOWED",
            Finding::MissingFallback { .. } => "MISSING_FALLBACK",
            Finding::NoTerminal => "NO_TERMINAL",
        }
    }

    pub fn subject(&self) -> &str {
        match self {
            Finding::Unreachable { state }
            | Finding::MissingDefault { state }
            | Finding::DuplicateDefault { state }
            | Finding::DuplicatePriority { state, .. }
            | Finding::UnknownPatternSet { state, .. }
            | Finding::Shadowed { state, .. }
            | Finding::MissingFallback { state } => state,
            Finding::DanglingTarget { from, .. } => from,
            Finding::UnreferencedPatternSet { set } => set,
            Finding::NoTerminal => "scenario",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Finding::Unreachable { .. } => "no path from the initial state".into(),
            Finding::DanglingTarget { priority, target, .. } => {
                format!("priority {priority} targets undefined state `{target}`")
            }
            Finding::MissingDefault { .. } => "non-terminal state has no default transition".into(),
            Finding::DuplicateDefault { .. } => "more than one default transition".into(),
            Finding::DuplicatePriority { priority, .. } => format!("priority {priority} used more than once"),
            Finding::UnknownPatternSet { set, .. } => format!("condition references undefined pattern set `{set}`"),
            Finding::UnreferencedPatternSet { .. } => "pattern set is never referenced".into(),
            Finding::Shadowed {
                priority,
                default_priority,
                ..
            } => format!("priority {priority} follows default at priority {default_priority} and never fires"),
            Finding::MissingFallback { .. } => "no utterance template or fallback text".into(),
            Finding::NoTerminal => "no terminal state (every state has outgoing transitions)".into(),
        }
    }
}

impl fmt::Display for Finding {
    /// `KIND<TAB>subject<TAB>detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.kind(), self.subject(), self.detail())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn unreachable(&self) -> BTreeSet<&str> {
        self.findings
            .iter()
            .filter_map(|f| match f {
                Finding::Unreachable { state } => Some(state.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Checks structural well-formedness. Every problem becomes a report entry;
/// an empty report means the scenario is well formed.
pub fn validate(scenario: &Scenario) -> ValidationReport {
    let mut findings = Vec::new();

    let reachable = reachable_states(scenario);
    for id in scenario.states.keys() {
        if !reachable.contains(id.as_str()) {
            findings.push(Finding::Unreachable { state: id.clone() });
        }
    }

    let mut referenced: HashSet<&str> = HashSet::new();
    for state in scenario.states.values() {
        let mut seen_priorities = HashSet::new();
        let mut default_priority: Option<u32> = None;
        let mut defaults = 0;
        for t in &state.transitions {
            if !scenario.states.contains_key(&t.target) {
                findings.push(Finding::DanglingTarget {
                    from: state.id.clone(),
                    priority: t.priority,
                    target: t.target.clone(),
                });
            }
            if !seen_priorities.insert(t.priority) {
                findings.push(Finding::DuplicatePriority {
                    state: state.id.clone(),
                    priority: t.priority,
                });
            }
            if let Some(dp) = default_priority {
                if t.priority > dp {
                    findings.push(Finding::Shadowed {
                        state: state.id.clone(),
                        priority: t.priority,
                        default_priority: dp,
                    });
                }
            }
            match &t.condition {
                Condition::Default => {
                    defaults += 1;
                    default_priority.get_or_insert(t.priority);
                }
                Condition::Matches(set) => {
                    referenced.insert(set.as_str());
                    if !scenario.pattern_sets.contains_key(set) {
                        findings.push(Finding::UnknownPatternSet {
                            state: state.id.clone(),
                            set: set.clone(),
                        });
                    }
                }
                _ => {}
            }
        }
        if !state.is_terminal() {
            match defaults {
                0 => findings.push(Finding::MissingDefault { state: state.id.clone() }),
                1 => {}
                _ => findings.push(Finding::DuplicateDefault { state: state.id.clone() }),
            }
        }
        if state.template.trim().is_empty() && state.fallback.as_deref().is_none_or(|f| f.trim().is_empty()) {
            findings.push(Finding::MissingFallback { state: state.id.clone() });
        }
    }

    for set in scenario.pattern_sets.keys() {
        if !referenced.contains(set.as_str()) {
            findings.push(Finding::UnreferencedPatternSet { set: set.clone() });
        }
    }

    if !scenario.states.values().any(|s| s.is_terminal()) {
        findings.push(Finding::NoTerminal);
    }

    ValidationReport { findings }
}

fn reachable_states(scenario: &Scenario) -> HashSet<&str> {
    let mut seen: HashSet<&str> = HashSet::new();
    let mut queue = VecDeque::new();
    if scenario.states.contains_key(&scenario.initial_state) {
        seen.insert(scenario.initial_state.as_str());
        queue.push_back(scenario.initial_state.as_str());
    }
    while let Some(id) = queue.pop_front() {
        for t in &scenario.states[id].transitions {
            if let Some((target, _)) = scenario.states.get_key_value(&t.target) {
                if seen.insert(target.as_str()) {
                    queue.push_back(target.as_str());
                }
            }
        }
    }
    seen
}
