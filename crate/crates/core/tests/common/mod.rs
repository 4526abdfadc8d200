//! Helpers shared by the integration and acceptance test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use tourbot::dialogue::DialogueEngine;
use tourbot::llm::{MockLlm, PromptLibrary};
use tourbot::nlu::{YesNoLabel, YesNoResult};
use tourbot::service::{router, AppState, ServiceConfig};
use tourbot::simulator::{persona_responder, Persona, UserSimulator};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data_dir() -> PathBuf {
    crate_dir().join("data")
}

pub fn fixture(name: &str) -> PathBuf {
    crate_dir().join("tests/fixtures").join(name)
}

/// The shipped service config.
pub fn config() -> ServiceConfig {
    ServiceConfig::load(&data_dir().join("tourbot.conf")).expect("shipped config loads")
}

/// Engine over the shipped data with the given mock LLM.
pub fn engine(llm: Arc<MockLlm>) -> DialogueEngine {
    config().build_engine_with(llm).expect("shipped engine builds")
}

pub fn personas() -> Vec<Persona> {
    Persona::load_dir(&data_dir().join("personas")).expect("shipped personas load")
}

pub fn persona(id: &str) -> Persona {
    personas().into_iter().find(|p| p.id == id).expect("persona exists")
}

/// User simulator with the deterministic persona responder.
pub fn simulator(engine: &DialogueEngine, seed: u64) -> UserSimulator {
    let names = engine.catalog().spots().iter().map(|s| s.name.clone()).collect();
    let llm = Arc::new(MockLlm::new(seed).with_responder(persona_responder(names)));
    let prompts = PromptLibrary::load_dir(&data_dir().join("prompts")).expect("prompts load");
    UserSimulator::new(llm, Arc::new(prompts))
}

pub fn yes_no(label: YesNoLabel) -> YesNoResult {
    let mut weights = [0.0; 3];
    weights[label.index()] = 1.0;
    YesNoResult::from_weights(weights)
}

/// A running in-process service.
pub struct TestService {
    pub base_url: String,
    pub app: Arc<AppState>,
    pub logs: tempfile::TempDir,
    _runtime: tokio::runtime::Runtime,
}

impl TestService {
    pub fn start(engine: DialogueEngine) -> Self {
        let logs = tempfile::tempdir().expect("temp dir");
        let app = Arc::new(AppState::new(Arc::new(engine), logs.path(), Duration::from_secs(1800)).expect("app state"));
        let runtime = tokio::runtime::Runtime::new().expect("runtime");
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .expect("bind");
        let addr = listener.local_addr().expect("addr");
        let service = router(app.clone(), "*");
        runtime.spawn(async move {
            axum::serve(listener, service).await.expect("serve");
        });
        TestService {
            base_url: format!("http://{addr}"),
            app,
            logs,
            _runtime: runtime,
        }
    }

    pub fn log_lines(&self, session_id: &str) -> Vec<serde_json::Value> {
        read_jsonl(&self.app.log_path(session_id))
    }
}

pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).expect("transcript line is JSON"))
        .collect()
}

/// Engine over the shipped resources but a different scenario file.
pub fn engine_for_scenario(scenario: &Path, llm: Arc<MockLlm>) -> DialogueEngine {
    let mut cfg = config();
    cfg.scenario = scenario.to_path_buf();
    cfg.build_engine_with(llm).expect("engine builds")
}

/// Map of the keys each fixture name promises: `defect_<kind>.tsv` has
/// exactly one finding of that kind, `clean_*` none.
pub fn expected_findings(file_name: &str) -> Vec<&'static str> {
    let table: BTreeMap<&str, &str> = BTreeMap::from([
        ("defect_unreachable.tsv", "UNREACHABLE"),
        ("defect_dangling.tsv", "DANGLING_TARGET"),
        ("defect_missing_default.tsv", "MISSING_DEFAULT"),
        ("defect_unknown_pattern_set.tsv", "UNKNOWN_PATTERN_SET"),
        ("defect_shadowed.tsv", "SHADOWED"),
    ]);
    table.get(file_name).map(|k| vec![*k]).unwrap_or_default()
}

pub mod oracles;
