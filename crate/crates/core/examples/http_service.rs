//! Start the REST service on an ephemeral port, hold a short conversation
//! over HTTP and print the JSONL transcript written to disk.
//!
//! ```bash
//! cargo run --example http_service
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use tourbot::llm::MockLlm;
use tourbot::service::{router, AppState, ServiceConfig};
use tourbot::wire::JsonClient;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let config = ServiceConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tourbot.conf"))?;
    let engine = config.build_engine_with(Arc::new(MockLlm::new(0)))?;
    let logs = std::env::temp_dir().join("tourbot-example-logs");
    let app = Arc::new(AppState::new(Arc::new(engine), &logs, config.session_ttl)?);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let service = router(app.clone(), "*");
    tokio::spawn(async move { axum::serve(listener, service).await });
    println!("serving on {base}");

    // The client is blocking; keep it off the runtime's workers.
    let session_id = tokio::task::spawn_blocking(move || -> anyhow::Result<String> {
        let http = JsonClient::new(Duration::from_secs(10));
        let (status, created) = http.post_raw(&format!("{base}/sessions"), &json!({"age": 41}))?;
        println!("POST /sessions -> {status}: {}", created["system_utterance"]);
        let id = created["session_id"].as_str().unwrap_or_default().to_string();
        for text in ["no, first time", "nothing yet", "I like food and culture"] {
            let (status, reply) = http.post_raw(&format!("{base}/sessions/{id}/utterance"), &json!({ "text": text }))?;
            println!("POST utterance {text:?} -> {status}: [{}] {}", reply["source"], reply["system_utterance"]);
        }
        let (_, summary) = http.get(&format!("{base}/sessions/{id}"))?;
        println!("GET /sessions/{id} -> {summary}");
        Ok(id)
    })
    .await??;

    println!("\ntranscript {}:", app.log_path(&session_id).display());
    print!("{}", std::fs::read_to_string(app.log_path(&session_id))?);
    Ok(())
}
