//! Score the same replies with the shipped sentiment models; the model is
//! chosen by the user's age.
//!
//! ```bash
//! cargo run --example sentiment_by_age
//! ```

use std::path::Path;
use std::sync::Arc;

use tourbot::nlu::{FfnModel, HashingEmbedder, SentimentEstimator, DEFAULT_EMBEDDING_DIM};

fn main() -> anyhow::Result<()> {
    let models = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/models");
    let load = |name: &str| -> anyhow::Result<FfnModel> { Ok(FfnModel::from_text(&std::fs::read_to_string(models.join(name))?)?) };
    let estimator = SentimentEstimator::new(
        Arc::new(HashingEmbedder::new(DEFAULT_EMBEDDING_DIM)),
        Some(load("sentiment_under50.ffn")?),
        Some(load("sentiment_atleast50.ffn")?),
    )?;

    let replies = ["That sounds wonderful, I'd love to go!", "Maybe, I'm not sure.", "Too crowded, not for me."];
    for age in [24, 49, 50, 71] {
        println!("age {age}:");
        for reply in replies {
            let score = estimator.estimate(reply, age)?;
            println!("  {:.2} [{}] {reply}", score.value, score.model_id.as_str());
        }
    }
    Ok(())
}
