//! Show how the response policy picks between the scenario text and the
//! LLM, and what happens when the LLM is down.
//!
//! ```bash
//! cargo run --example rule_or_llm
//! ```

use std::path::Path;
use std::sync::Arc;

use tourbot::dialogue::SessionMeta;
use tourbot::llm::MockLlm;
use tourbot::service::ServiceConfig;

fn main() -> anyhow::Result<()> {
    let config = ServiceConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tourbot.conf"))?;
    for (label, llm) in [("healthy LLM", MockLlm::new(0)), ("failing LLM", MockLlm::new(0).with_failure_rate(1.0))] {
        let llm = Arc::new(llm);
        let engine = config.build_engine_with(llm.clone())?;
        let startup_calls = llm.call_count();
        let (mut frame, _) = engine.create_session(label, &SessionMeta::with_age(33))?;
        println!("== {label}");
        // The first reply matches a scenario pattern; the second does not.
        for text in ["yes, I have", "We loved the little shops near Gion"] {
            let r = engine.advance(&mut frame, text)?;
            println!("  {text:?}\n    -> [{}] {}", r.source, r.system_utterance);
        }
        println!("  LLM calls during the dialogue: {}", llm.call_count() - startup_calls);
    }

    let llm = Arc::new(MockLlm::new(0).script("extract_desired", "Kinkaku-ji"));
    let engine = config.build_engine_with(llm)?;
    let utterance = "I want to see Kinkaku-ji and maybe Arashiyama, but mostly Kinkaku-ji";
    println!("== desired spot\n  {utterance:?} -> {:?}", engine.policy().extract_desired_spot(utterance, engine.catalog()));
    Ok(())
}
