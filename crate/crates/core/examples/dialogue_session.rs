//! Run one scripted conversation through the engine with the mock LLM and
//! print every turn, the source of each reply and the final plan.
//!
//! ```bash
//! cargo run --example dialogue_session
//! ```

use std::path::Path;
use std::sync::Arc;

use tourbot::dialogue::SessionMeta;
use tourbot::llm::MockLlm;
use tourbot::service::ServiceConfig;

fn main() -> anyhow::Result<()> {
    let config = ServiceConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tourbot.conf"))?;
    let engine = config.build_engine_with(Arc::new(MockLlm::new(1)))?;

    let (mut frame, opening) = engine.create_session("demo", &SessionMeta::with_age(58))?;
    println!("SYSTEM: {opening}");
    let user = [
        "Yes, I have been once.",
        "Kinkaku-ji and Gion.",
        "I'd really like to see Nijo Castle.",
        "Old temples and history, I think.",
        "yes",
        "That sounds lovely!",
        "Is it crowded in the morning?",
        "no",
        "sure",
        "It looks beautiful.",
        "yes",
        "ok",
        "thanks",
    ];
    for text in user {
        let r = engine.advance(&mut frame, text)?;
        println!("USER:   {text}");
        println!("SYSTEM: [{} {}] {}", r.phase, r.source, r.system_utterance);
        if r.ended {
            let plan = r.plan.expect("terminal turns carry the plan");
            println!("\nplan: {:?}", plan.spots.iter().map(|s| &s.name).collect::<Vec<_>>());
            break;
        }
    }
    println!("introduced: {:?}", frame.introduced_spots);
    Ok(())
}
