mod common;

use std::collections::{BTreeSet, HashMap, VecDeque};

use proptest::prelude::*;

use tourbot::dialogue::pick_transition;
use tourbot::nlu::YesNoLabel;
use tourbot::scenario::{parse_scenario, validate, Phase, Scenario, Signals};

#[test]
fn fixture_corpus_flags_exactly_the_seeded_defect() {
    let dir = common::fixture("scenarios");
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let scenario = parse_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let kinds: Vec<&str> = validate(&scenario).findings.iter().map(|f| f.kind()).collect();
        assert_eq!(kinds, common::expected_findings(&name), "{name}");
    }
}

#[test]
fn twelve_state_fixture_covers_all_phases_and_round_trips() {
    let text = std::fs::read_to_string(common::fixture("four_phase_12.tsv")).unwrap();
    let scenario = parse_scenario(&text).unwrap();
    assert_eq!(scenario.states.len(), 12);
    let phases: BTreeSet<Phase> = scenario.states.values().map(|s| s.phase).collect();
    assert_eq!(phases, Phase::ALL.into_iter().collect());
    assert!(validate(&scenario).is_empty());
    assert_eq!(parse_scenario(&scenario.to_document()).unwrap(), scenario);
}

#[test]
fn shipped_scenario_is_well_formed() {
    let text = std::fs::read_to_string(common::data_dir().join("scenario/kyoto_tour.tsv")).unwrap();
    let scenario = parse_scenario(&text).unwrap();
    assert!(validate(&scenario).is_empty(), "{:?}", validate(&scenario));
    assert_eq!(parse_scenario(&scenario.to_document()).unwrap(), scenario);
}

/// For every reachable non-terminal state and every combination of NLU
/// signals, exactly one transition fires.
fn assert_exactly_one_fires(scenario: &Scenario) {
    let sets: Vec<Option<&str>> = std::iter::once(None)
        .chain(scenario.pattern_sets.keys().map(|k| Some(k.as_str())))
        .collect();
    for state in scenario.states.values().filter(|s| !s.is_terminal()) {
        for &matched in &sets {
            for yes_no in YesNoLabel::ALL {
                for sentiment in [0.0, 0.5, 1.0] {
                    for frame_value in [false, true] {
                        let frame_has = move |_: &str| frame_value;
                        let signals = Signals {
                            matched,
                            yes_no,
                            sentiment,
                            frame_has: &frame_has,
                        };
                        let holding: Vec<u32> = state
                            .transitions
                            .iter()
                            .filter(|t| t.condition.holds(&signals))
                            .map(|t| t.priority)
                            .collect();
                        let fired = pick_transition(state, &signals).expect("a transition fires");
                        assert_eq!(fired.priority, holding[0], "state {}", state.id);
                        assert!(scenario.states.contains_key(&fired.target));
                    }
                }
            }
        }
    }
}

#[test]
fn clean_scenarios_always_fire_exactly_one_transition() {
    let mut paths: Vec<_> = std::fs::read_dir(common::fixture("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("clean_"))
        .collect();
    paths.push(common::fixture("four_phase_12.tsv"));
    paths.push(common::data_dir().join("scenario/kyoto_tour.tsv"));
    for path in paths {
        let scenario = parse_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(validate(&scenario).is_empty(), "{}", path.display());
        assert_exactly_one_fires(&scenario);
    }
}

const CONDITIONS: [&str; 8] = [
    "matches(set_a)",
    "matches(set_b)",
    "yes_no = yes",
    "yes_no = other",
    "sentiment >= 0.6",
    "sentiment < 0.25",
    "frame_has(theme)",
    "default",
];

#[derive(Debug, Clone)]
struct RandomScenario {
    phases: Vec<usize>,
    /// (from, condition index, target) — targets may exceed the state count
    /// to produce dangling edges.
    edges: Vec<(usize, usize, usize)>,
    actions: Vec<bool>,
}

fn random_scenario() -> impl Strategy<Value = RandomScenario> {
    (2usize..7).prop_flat_map(|n| {
        (
            proptest::collection::vec(0usize..4, n),
            proptest::collection::vec((0..n, 0usize..CONDITIONS.len(), 0..n + 1), 0..(3 * n)),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(phases, edges, actions)| RandomScenario { phases, edges, actions })
    })
}

impl RandomScenario {
    fn document(&self) -> String {
        let mut doc = String::from("[meta]\ntitle\trandom\n\n[states]\n");
        for (i, p) in self.phases.iter().enumerate() {
            let action = if self.actions[i] { "record_interest(1), set_theme(Nature)" } else { "" };
            doc.push_str(&format!("s{i}\t{}\tUtterance {i} for {{name}}\t{action}\n", Phase::ALL[*p]));
        }
        doc.push_str("\n[transitions]\n");
        let mut next_priority: HashMap<usize, u32> = HashMap::new();
        for &(from, cond, to) in &self.edges {
            let p = next_priority.entry(from).or_default();
            doc.push_str(&format!("s{from}\t{p}\t{}\ts{to}\n", CONDITIONS[cond]));
            *p += 1;
        }
        doc.push_str("\n[patterns]\nset_a\tyes\nset_a\tsure *\nset_b\tno\n");
        doc
    }

    /// States reachable from `s0` by breadth-first search over edges whose
    /// target exists.
    fn bfs_reachable(&self) -> BTreeSet<String> {
        let n = self.phases.len();
        let mut seen = BTreeSet::from([0usize]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &(from, _, to) in &self.edges {
                if from == u && to < n && seen.insert(to) {
                    queue.push_back(to);
                }
            }
        }
        seen.into_iter().map(|i| format!("s{i}")).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialize_then_parse_is_identity(random in random_scenario()) {
        let parsed = parse_scenario(&random.document()).unwrap();
        let reparsed = parse_scenario(&parsed.to_document()).unwrap();
        prop_assert_eq!(reparsed, parsed);
    }

    #[test]
    fn reachability_matches_bfs_oracle(random in random_scenario()) {
        let scenario = parse_scenario(&random.document()).unwrap();
        let report = validate(&scenario);
        let all: BTreeSet<String> = scenario.states.keys().cloned().collect();
        let unreachable: BTreeSet<String> = report.unreachable().into_iter().map(String::from).collect();
        let expected: BTreeSet<String> = all.difference(&random.bfs_reachable()).cloned().collect();
        prop_assert_eq!(unreachable, expected);
    }

    #[test]
    fn well_formed_random_scenarios_fire_exactly_one_transition(random in random_scenario()) {
        let scenario = parse_scenario(&random.document()).unwrap();
        if validate(&scenario).is_empty() {
            assert_exactly_one_fires(&scenario);
        }
    }
}
