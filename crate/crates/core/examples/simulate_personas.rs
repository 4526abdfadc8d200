//! Drive the engine with every shipped persona and report the aggregate
//! metrics.
//!
//! ```bash
//! cargo run --example simulate_personas
//! ```

use std::path::Path;
use std::sync::Arc;

use tourbot::llm::{MockLlm, PromptLibrary};
use tourbot::service::ServiceConfig;
use tourbot::simulator::{compute_metrics, persona_responder, InProcessTarget, Persona, UserSimulator};

fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = ServiceConfig::load(&data.join("tourbot.conf"))?;
    let personas = Persona::load_dir(&data.join("personas"))?;
    let prompts = Arc::new(PromptLibrary::load_dir(&data.join("prompts"))?);

    let mut logs = Vec::new();
    for persona in &personas {
        for seed in 0..3 {
            let engine = config.build_engine_with(Arc::new(MockLlm::new(seed)))?;
            let names = engine.catalog().spots().iter().map(|s| s.name.clone()).collect();
            let user_llm = Arc::new(MockLlm::new(seed).with_responder(persona_responder(names)));
            let simulator = UserSimulator::new(user_llm, prompts.clone());
            let mut target = InProcessTarget::new(&engine);
            let log = simulator.run(persona, &mut target, seed)?;
            let plan = log.plan.as_ref().map(|p| p.spots.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(" + "));
            println!("{:<22} seed {seed}: {:>2} turns, plan {}", persona.id, log.turns.len(), plan.unwrap_or_else(|| "-".into()));
            logs.push(log);
        }
    }
    let metrics = compute_metrics(&logs)?;
    println!("\n{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}
