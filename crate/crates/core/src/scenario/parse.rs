use indexmap::IndexMap;
use thiserror::Error;

use super::{compile_condition, Action, ConditionError, Pattern, Phase, Scenario, State, Transition};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate state id `{id}`")]
    DuplicateState { line: usize, id: String },
    #[error("line {line}, column 2: unknown phase `{name}`")]
    UnknownPhase { line: usize, name: String },
    #[error("line {line}, column 3: malformed condition `{expr}`: {source}")]
    MalformedCondition {
        line: usize,
        expr: String,
        #[source]
        source: ConditionError,
    },
    #[error("scenario defines no states")]
    NoStates,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Meta,
    States,
    Transitions,
    Patterns,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn check_identifier(raw: &str, line: usize, column: usize, what: &str) -> Result<String, ScenarioError> {
    let id = raw.trim();
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(id.to_string())
    } else {
        Err(syntax(line, column, format!("invalid {what} `{raw}`")))
    }
}

/// Parses a scenario document.
///
/// The document is UTF-8, tab-separated, with `#` comment lines and blank
/// lines ignored. Sections start with a header on its own line:
///
/// ```text
/// [states]       state_id  phase  utterance_template  actions  [llm_prompt  [fallback]]
/// [transitions]  from_state  priority  condition  to_state
/// [patterns]     pattern_set_id  pattern
/// [meta]         key  value
/// ```
///
/// The first state row is the initial state. Dangling targets and unknown
/// pattern sets are left for [`super::validate`] to report.
pub fn parse_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let mut section: Option<Section> = None;
    let mut states: IndexMap<String, State> = IndexMap::new();
    let mut pending: Vec<(usize, String, Transition)> = Vec::new();
    let mut pattern_sets: IndexMap<String, Vec<Pattern>> = IndexMap::new();
    let mut metadata = IndexMap::new();

    for (idx, raw_line) in document.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains('\t') {
            section = Some(match &trimmed[1..trimmed.len() - 1] {
                "states" => Section::States,
                "transitions" => Section::Transitions,
                "patterns" => Section::Patterns,
                "meta" => Section::Meta,
                other => return Err(syntax(line_no, 1, format!("unknown section `{other}`"))),
            });
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        match section {
            None => return Err(syntax(line_no, 1, "row outside of any section")),
            Some(Section::Meta) => {
                if cells.len() != 2 {
                    return Err(syntax(line_no, cells.len().min(3), "meta rows need `key<TAB>value`"));
                }
                let key = check_identifier(cells[0], line_no, 1, "meta key")?;
                metadata.insert(key, cells[1].trim().to_string());
            }
            Some(Section::States) => {
                if !(3..=6).contains(&cells.len()) {
                    return Err(syntax(
                        line_no,
                        cells.len().min(7),
                        format!("state rows have 4 to 6 columns, found {}", cells.len()),
                    ));
                }
                let id = check_identifier(cells[0], line_no, 1, "state id")?;
                let phase: Phase = cells[1].parse().map_err(|_| ScenarioError::UnknownPhase {
                    line: line_no,
                    name: cells[1].trim().to_string(),
                })?;
                let template = cells[2].trim().to_string();
                let actions = match cells.get(3).map(|c| c.trim()) {
                    None | Some("") => Vec::new(),
                    Some(list) => list
                        .split(',')
                        .map(|a| a.parse::<Action>().map_err(|msg| syntax(line_no, 4, msg)))
                        .collect::<Result<Vec<_>, _>>()?,
                };
                let llm_prompt = match cells.get(4).map(|c| c.trim()) {
                    None | Some("") => None,
                    Some(p) => Some(check_identifier(p, line_no, 5, "prompt id")?),
                };
                let fallback = cells
                    .get(5)
                    .map(|c| c.trim())
                    .filter(|c| !c.is_empty())
                    .map(str::to_string);
                if states.contains_key(&id) {
                    return Err(ScenarioError::DuplicateState { line: line_no, id });
                }
                states.insert(
                    id.clone(),
                    State {
                        id,
                        phase,
                        template,
                        transitions: Vec::new(),
                        actions,
                        llm_prompt,
                        fallback,
                    },
                );
            }
            Some(Section::Transitions) => {
                if cells.len() != 4 {
                    return Err(syntax(
                        line_no,
                        cells.len().min(5),
                        format!("transition rows have 4 columns, found {}", cells.len()),
                    ));
                }
                let from = check_identifier(cells[0], line_no, 1, "source state")?;
                let priority: u32 = cells[1]
                    .trim()
                    .parse()
                    .map_err(|_| syntax(line_no, 2, format!("priority `{}` is not a non-negative integer", cells[1])))?;
                let condition =
                    compile_condition(cells[2]).map_err(|source| ScenarioError::MalformedCondition {
                        line: line_no,
                        expr: cells[2].trim().to_string(),
                        source,
                    })?;
                let target = check_identifier(cells[3], line_no, 4, "target state")?;
                pending.push((
                    line_no,
                    from,
                    Transition {
                        priority,
                        condition,
                        target,
                    },
                ));
            }
            Some(Section::Patterns) => {
                if cells.len() != 2 {
                    return Err(syntax(
                        line_no,
                        cells.len().min(3),
                        format!("pattern rows have 2 columns, found {}", cells.len()),
                    ));
                }
                let id = check_identifier(cells[0], line_no, 1, "pattern set id")?;
                let pattern = cells[1].trim();
                if pattern.is_empty() {
                    return Err(syntax(line_no, 2, "empty pattern"));
                }
                pattern_sets.entry(id).or_default().push(Pattern::new(pattern));
            }
        }
    }

    for (line_no, from, transition) in pending {
        let state = states
            .get_mut(&from)
            .ok_or_else(|| syntax(line_no, 1, format!("transition from undeclared state `{from}`")))?;
        state.transitions.push(transition);
    }
    for state in states.values_mut() {
        state.transitions.sort_by_key(|t| t.priority);
    }
    let initial_state = states.keys().next().cloned().ok_or(ScenarioError::NoStates)?;
    Ok(Scenario {
        states,
        pattern_sets,
        initial_state,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::YesNoLabel;
    use crate::scenario::Condition;

    const MINIMAL: &str = "[states]\ngreet\tIcebreaker\tHello!\t\nend\tPlanProposal\tBye.\t\n\n[transitions]\ngreet\t0\tdefault\tend\n";

    #[test]
    fn minimal_two_state_scenario() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.states.len(), 2);
        assert_eq!(s.initial_state, "greet");
        let transitions: usize = s.states.values().map(|st| st.transitions.len()).sum();
        assert_eq!(transitions, 1);
        assert!(s.states["end"].is_terminal());
    }

    #[test]
    fn yes_no_condition_cell() {
        let doc = "[states]\nask\tSpotIntroduction\tInterested?\nend\tPlanProposal\tBye\n[transitions]\nask\t0\tyes_no = yes\tend\nask\t1\tdefault\tend\n";
        let s = parse_scenario(doc).unwrap();
        assert_eq!(s.states["ask"].transitions[0].condition, Condition::YesNoIs(YesNoLabel::Yes));
    }

    #[test]
    fn transitions_are_sorted_by_priority() {
        let doc = "[transitions]\na\t5\tdefault\tb\na\t1\tyes_no = no\tb\n[states]\na\tIcebreaker\tQ\nb\tIcebreaker\tE\n";
        let s = parse_scenario(doc).unwrap();
        let prios: Vec<u32> = s.states["a"].transitions.iter().map(|t| t.priority).collect();
        assert_eq!(prios, vec![1, 5]);
    }

    #[test]
    fn reports_locations() {
        let err = parse_scenario("[states]\na\tIcebreaker\tHi\nb\tLunch\tHi\n").unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownPhase { line: 3, ref name } if name == "Lunch"));

        let err = parse_scenario("[states]\na\tIcebreaker\tHi\na\tIcebreaker\tAgain\n").unwrap_err();
        assert!(matches!(err, ScenarioError::DuplicateState { line: 3, ref id } if id == "a"));

        let err = parse_scenario("[states]\na\tIcebreaker\tHi\n[transitions]\na\t0\tsentiment >= 2\ta\n").unwrap_err();
        assert!(matches!(err, ScenarioError::MalformedCondition { line: 4, .. }));

        let err = parse_scenario("[states]\na\tIcebreaker\tHi\n[transitions]\na\tfirst\tdefault\ta\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 4, column: 2, .. }));

        let err = parse_scenario("a\tIcebreaker\tHi\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 1, .. }));

        let err = parse_scenario("[states]\na\tIcebreaker\tHi\tteleport\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 2, column: 4, .. }));

        let err = parse_scenario("[weather]\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 1, .. }));

        assert!(matches!(parse_scenario("# nothing\n"), Err(ScenarioError::NoStates)));
    }

    #[test]
    fn optional_prompt_and_fallback_columns() {
        let doc = "[states]\na\tIcebreaker\tHi\t\tchat\tSorry, once more?\nb\tIcebreaker\tBye\t\tchat\n";
        let s = parse_scenario(doc).unwrap();
        assert_eq!(s.states["a"].llm_prompt.as_deref(), Some("chat"));
        assert_eq!(s.states["a"].fallback_template(), "Sorry, once more?");
        assert_eq!(s.states["b"].fallback_template(), "Bye");
    }

    #[test]
    fn dangling_targets_parse() {
        let s = parse_scenario("[states]\na\tIcebreaker\tHi\n[transitions]\na\t0\tdefault\tghost\n").unwrap();
        assert_eq!(s.states["a"].transitions[0].target, "ghost");
    }
}
