//! Turn interest answers and sentiment scores into a two-spot plan and its
//! template rationale.
//!
//! ```bash
//! cargo run --example build_plan
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use tourbot::nlu::{AgeBand, SentimentScore, YesNoLabel, YesNoResult};
use tourbot::plan::{build_plan, recommendation_reason, IcebreakerFacts};
use tourbot::spotdb::{GenreMap, SpotCatalog, Theme};

fn answer(label: YesNoLabel) -> YesNoResult {
    let mut weights = [0.0; 3];
    weights[label.index()] = 1.0;
    YesNoResult::from_weights(weights)
}

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/catalog");
    let genres = GenreMap::parse(&std::fs::read_to_string(dir.join("genres.tsv"))?)?;
    let catalog = SpotCatalog::load(&std::fs::read_to_string(dir.join("kyoto_spots.csv"))?, &genres)?;

    let introduced: Vec<String> = ["kiyomizudera", "sanjusangendo", "toji"].map(String::from).to_vec();
    let heard = [(YesNoLabel::No, 0.2), (YesNoLabel::Yes, 0.7), (YesNoLabel::Other, 0.9)];
    let answers: BTreeMap<_, _> = introduced.iter().cloned().zip(heard.iter().map(|(l, _)| answer(*l))).collect();
    let sentiments: BTreeMap<_, _> = introduced
        .iter()
        .cloned()
        .zip(heard.iter().map(|(_, v)| SentimentScore { value: *v, model_id: AgeBand::Under50 }))
        .collect();
    let facts = IcebreakerFacts {
        visited: vec!["Kinkaku-ji".into()],
        theme: Some(Theme::History),
    };

    for desired in [None, Some("nijo_castle")] {
        let plan = build_plan(&introduced, &answers, &sentiments, desired)?;
        println!("desired {:?} -> {:?}", desired, plan.spots);
        for (spot, evidence) in plan.spots.iter().zip(&plan.evidence) {
            println!("  {spot}: {:?}, sentiment {:?}", evidence.source, evidence.sentiment);
        }
        println!("  {}", recommendation_reason(&plan, &catalog, &facts));
    }
    Ok(())
}
