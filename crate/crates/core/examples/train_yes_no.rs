//! Train the feed-forward yes/no classifier on the synthetic corpus and
//! compare it with the pattern lexicon on the hand-labelled fixture.
//!
//! ```bash
//! cargo run --release --example train_yes_no
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use tourbot::nlu::dataset::{holdout_split, parse_yesno, train_yesno, yesno_accuracy};
use tourbot::nlu::{HashingEmbedder, Lexicon, TrainParams, YesNoClassifier, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN};

fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nlu");
    let corpus = parse_yesno(&std::fs::read_to_string(data.join("yesno_synthetic.tsv"))?)?;
    let (train, test) = holdout_split(&corpus, 0.2, 7);

    let embedder = Arc::new(HashingEmbedder::new(DEFAULT_EMBEDDING_DIM));
    let params = TrainParams {
        epochs: 60,
        seed: 7,
        ..TrainParams::default()
    };
    let started = Instant::now();
    let (model, losses) = train_yesno(&train, embedder.as_ref(), DEFAULT_HIDDEN, &params)?;
    println!(
        "trained on {} examples in {:.1?}; loss {:.3} -> {:.3}",
        train.len(),
        started.elapsed(),
        losses[0],
        losses[losses.len() - 1]
    );

    let neural = YesNoClassifier::neural(model, embedder)?;
    println!("neural held-out accuracy: {:.3} ({} examples)", yesno_accuracy(&neural, &test), test.len());

    let fixture = parse_yesno(&std::fs::read_to_string(data.join("yesno_fixture.tsv"))?)?;
    let lexicon = YesNoClassifier::pattern(Lexicon::parse(&std::fs::read_to_string(data.join("lexicon.txt"))?)?);
    println!("lexicon fixture accuracy:  {:.3}", yesno_accuracy(&lexicon, &fixture));

    for (question, answer) in [("Have you been to Kyoto?", "yes, twice"), ("Do you like gardens?", "not really"), ("Shall we go?", "hmm")] {
        let r = neural.classify(question, answer);
        println!("  {answer:>12} -> {:?} (yes {:.2}, no {:.2}, other {:.2})", r.label, r.scores.yes, r.scores.no, r.scores.other);
    }
    Ok(())
}
