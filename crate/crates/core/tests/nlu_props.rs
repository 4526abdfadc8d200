mod common;

use std::sync::Arc;

use proptest::prelude::*;

use tourbot::nlu::dataset::{parse_yesno, yesno_accuracy};
use tourbot::nlu::{
    gradient_check, AgeBand, Embedder, FfnModel, HashingEmbedder, Lexicon, OutputHead, SentimentEstimator, Target,
    TrainParams, YesNoClassifier, YesNoLabel, YesNoResult,
};

fn lexicon() -> YesNoClassifier {
    let text = std::fs::read_to_string(common::data_dir().join("nlu/lexicon.txt")).unwrap();
    YesNoClassifier::pattern(Lexicon::parse(&text).unwrap())
}

fn small_neural() -> YesNoClassifier {
    let model = FfnModel::random(32, 6, 3, OutputHead::Softmax, 4).unwrap();
    YesNoClassifier::neural(model, Arc::new(HashingEmbedder::new(32))).unwrap()
}

fn small_sentiment() -> SentimentEstimator {
    let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::new(32));
    SentimentEstimator::new(
        embedder,
        Some(FfnModel::random(32, 6, 1, OutputHead::Sigmoid, 1).unwrap()),
        Some(FfnModel::random(32, 6, 1, OutputHead::Sigmoid, 2).unwrap()),
    )
    .unwrap()
}

fn assert_simplex(result: &YesNoResult) {
    let s = result.scores;
    let values = [s.yes, s.no, s.other];
    assert!(values.iter().all(|&v| v >= 0.0), "{values:?}");
    assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{values:?}");
    let best = values.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(result.scores.get(result.label), best);
}

#[test]
fn blank_responses_are_other_for_both_backends() {
    for classifier in [lexicon(), small_neural()] {
        for blank in ["", "   ", "\t\n"] {
            let r = classifier.classify("Do you like temples?", blank);
            assert_eq!(r.label, YesNoLabel::Other);
            assert_eq!((r.scores.yes, r.scores.no, r.scores.other), (0.0, 0.0, 1.0));
        }
    }
}

#[test]
fn lexicon_reaches_the_fixture_accuracy() {
    let text = std::fs::read_to_string(common::data_dir().join("nlu/yesno_fixture.tsv")).unwrap();
    let fixture = parse_yesno(&text).unwrap();
    assert_eq!(fixture.len(), 60);
    assert!(yesno_accuracy(&lexicon(), &fixture) >= 0.95);
}

#[test]
fn shipped_models_load_with_the_default_dimensions() {
    let cfg = common::config();
    for path in [&cfg.sentiment_under50, &cfg.sentiment_atleast50, cfg.yesno_model.as_ref().unwrap()] {
        let model = FfnModel::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!((model.input_dim(), model.hidden_dim()), (256, 64), "{}", path.display());
    }
}

#[test]
fn age_switch_is_a_step_at_fifty() {
    let estimator = small_sentiment();
    for age in 0..=120 {
        let band = estimator.estimate("that was fun", age).unwrap().model_id;
        assert_eq!(band == AgeBand::Under50, age < 50, "age {age}");
    }
}

#[test]
fn gradients_match_finite_differences_over_twenty_seeds() {
    for seed in 100..120 {
        let input: Vec<f64> = (0..5).map(|i| ((seed * 7 + i) as f64 * 0.37).sin()).collect();
        for (head, output, target) in [
            (OutputHead::Softmax, 3, Target::Class(seed as usize % 3)),
            (OutputHead::Sigmoid, 1, Target::Score((seed % 10) as f64 / 10.0)),
        ] {
            let model = FfnModel::random(5, 7, output, head, seed).unwrap();
            let err = gradient_check(&model, &input, target).unwrap();
            assert!(err < 1e-4, "seed {seed} {head}: {err:e}");
        }
    }
}

#[test]
fn training_is_bitwise_reproducible() {
    let data: Vec<(Vec<f64>, Target)> = (0..30)
        .map(|i| (vec![(i as f64 * 0.1).sin(), (i as f64 * 0.7).cos()], Target::Score((i % 2) as f64)))
        .collect();
    let params = TrainParams {
        epochs: 25,
        seed: 3,
        ..TrainParams::default()
    };
    let run = || {
        let mut m = FfnModel::random(2, 6, 1, OutputHead::Sigmoid, 3).unwrap();
        let losses = m.train(&data, &params).unwrap();
        (m.to_text(), losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn classifier_scores_form_a_simplex(question in ".{0,40}", response in ".{0,60}") {
        assert_simplex(&lexicon().classify(&question, &response));
        assert_simplex(&small_neural().classify(&question, &response));
    }

    #[test]
    fn sentiment_stays_in_unit_interval(response in any::<String>(), age in 0u32..130) {
        let value = small_sentiment().estimate(&response, age).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&value));
    }

    #[test]
    fn gradient_check_holds_on_random_models(seed in any::<u64>(), softmax in any::<bool>()) {
        let input: Vec<f64> = (0..4).map(|i| ((seed.wrapping_add(i) % 1000) as f64 / 500.0) - 1.0).collect();
        let (head, output, target) = if softmax {
            (OutputHead::Softmax, 3, Target::Class((seed % 3) as usize))
        } else {
            (OutputHead::Sigmoid, 1, Target::Score(0.3))
        };
        let model = FfnModel::random(4, 5, output, head, seed).unwrap();
        prop_assert!(gradient_check(&model, &input, target).unwrap() < 1e-4);
    }
}
