mod common;

use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use common::TestService;
use tourbot::llm::MockLlm;
use tourbot::simulator::{HttpTarget, InProcessTarget};
use tourbot::wire::JsonClient;

fn http() -> JsonClient {
    JsonClient::new(Duration::from_secs(10))
}

fn service() -> TestService {
    TestService::start(common::engine(Arc::new(MockLlm::new(0))))
}

fn create(svc: &TestService, body: Value) -> (u16, Value) {
    http().post_raw(&format!("{}/sessions", svc.base_url), &body).unwrap()
}

fn say(base: &str, id: &str, text: &str) -> (u16, Value) {
    http()
        .post_raw(&format!("{base}/sessions/{id}/utterance"), &json!({ "text": text }))
        .unwrap()
}

#[test]
fn sessions_start_in_the_icebreaker() {
    let svc = service();
    let (status, a) = create(&svc, json!({"age": 30}));
    assert_eq!(status, 201);
    assert_eq!(a["phase"], "Icebreaker");
    assert!(!a["system_utterance"].as_str().unwrap().is_empty());
    let (_, b) = create(&svc, json!({"age": 30, "name": "Aki"}));
    assert_ne!(a["session_id"], b["session_id"]);
}

#[test]
fn bad_requests_are_rejected() {
    let svc = service();
    for body in [json!({"age": -1}), json!({}), json!({"age": "old"}), json!({"age": 1.5})] {
        assert_eq!(create(&svc, body.clone()).0, 400, "{body}");
    }
    let (_, s) = create(&svc, json!({"age": 40}));
    let id = s["session_id"].as_str().unwrap();
    assert_eq!(say(&svc.base_url, id, "   ").0, 400);
    let (status, _) = http()
        .post_raw(&format!("{}/sessions/{id}/utterance", svc.base_url), &json!({"words": "hi"}))
        .unwrap();
    assert_eq!(status, 400);
    assert_eq!(say(&svc.base_url, "no-such-session", "hi").0, 404);
    assert_eq!(http().get(&format!("{}/sessions/no-such-session", svc.base_url)).unwrap().0, 404);
}

#[test]
fn frame_summary_tracks_turns() {
    let svc = service();
    let (_, s) = create(&svc, json!({"age": 40}));
    let id = s["session_id"].as_str().unwrap();
    let url = format!("{}/sessions/{id}", svc.base_url);
    let (status, summary) = http().get(&url).unwrap();
    assert_eq!((status, &summary["turn_count"], &summary["ended"]), (200, &json!(0), &json!(false)));
    for text in ["no", "not sure", "nothing much"] {
        assert_eq!(say(&svc.base_url, id, text).0, 200);
    }
    let (_, summary) = http().get(&url).unwrap();
    assert_eq!(summary["turn_count"], 3);
    assert_eq!(svc.log_lines(id).len(), 3);
}

#[test]
fn a_full_conversation_ends_with_a_plan_and_then_conflicts() {
    let svc = service();
    let (_, s) = create(&svc, json!({"age": 63}));
    let id = s["session_id"].as_str().unwrap();
    let mut last = Value::Null;
    for turn in 1..=40 {
        let text = if turn % 3 == 0 { "It was wonderful, I loved it" } else { "yes" };
        let (status, reply) = say(&svc.base_url, id, text);
        assert_eq!(status, 200, "{reply}");
        assert_eq!(reply["turn"], turn);
        last = reply;
        if last["ended"] == true {
            break;
        }
    }
    assert_eq!(last["ended"], true);
    assert_eq!(last["phase"], "PlanProposal");
    assert_eq!(last["plan"]["spots"].as_array().unwrap().len(), 2);
    assert_eq!(say(&svc.base_url, id, "one more thing").0, 409);

    let lines = svc.log_lines(id);
    assert_eq!(lines.len() as u64, last["turn"].as_u64().unwrap());
    assert!(lines.iter().enumerate().all(|(i, l)| l["turn"] == i as u64 + 1));
}

#[test]
fn simulating_over_http_matches_in_process() {
    let persona = common::persona("curious_questioner");
    let svc = service();
    let mut remote = HttpTarget::new(&svc.base_url, Duration::from_secs(10));
    let over_http = common::simulator(svc.app.engine(), 5).run(&persona, &mut remote, 5).unwrap();

    let engine = common::engine(Arc::new(MockLlm::new(0)));
    let mut local = InProcessTarget::new(&engine);
    let in_process = common::simulator(&engine, 5).run(&persona, &mut local, 5).unwrap();
    assert!(in_process.completed);
    assert_eq!(over_http.to_jsonl(), in_process.to_jsonl());
}

#[test]
fn transcripts_survive_a_killed_server() {
    let logs = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_tourbot"))
        .args(["serve", "--config"])
        .arg(common::data_dir().join("tourbot.conf"))
        .env("TOURBOT_LISTEN", "127.0.0.1:0")
        .env("TOURBOT_LOG_DIR", logs.path())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    let base = format!("http://{addr}");

    let (status, s) = http().post_raw(&format!("{base}/sessions"), &json!({"age": 25})).unwrap();
    assert_eq!(status, 201);
    let id = s["session_id"].as_str().unwrap().to_string();
    let texts = ["yes", "Gion, I think", "what's good to eat?"];
    for text in texts {
        assert_eq!(say(&base, &id, text).0, 200);
    }
    child.kill().unwrap();
    child.wait().unwrap();

    let lines = common::read_jsonl(&logs.path().join(format!("{id}.jsonl")));
    assert_eq!(lines.len(), texts.len());
    for (line, text) in lines.iter().zip(texts) {
        assert_eq!(line["user_utterance"], text);
    }
}
