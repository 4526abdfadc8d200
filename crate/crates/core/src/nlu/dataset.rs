//! Labeled example files and the training/evaluation loops built on them.
//!
//! Yes/no file rows are `label<TAB>question<TAB>response`; sentiment rows
//! are `score<TAB>response`. Blank lines and `#` comments are skipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Embedder, FfnModel, NluError, OutputHead, Target, TrainParams, YesNoClassifier, YesNoLabel, QUESTION_SEPARATOR};

#[derive(Debug, Clone, PartialEq)]
pub struct YesNoExample {
    pub label: YesNoLabel,
    pub question: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentExample {
    pub score: f64,
    pub response: String,
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(idx, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            None
        } else {
            Some((idx + 1, line.split('\t').collect()))
        }
    })
}

pub fn parse_yesno(text: &str) -> Result<Vec<YesNoExample>, NluError> {
    rows(text)
        .map(|(line, cells)| {
            if cells.len() != 3 {
                return Err(NluError::Dataset {
                    line,
                    message: format!("expected label, question, response; found {} columns", cells.len()),
                });
            }
            let label = YesNoLabel::parse(cells[0]).ok_or_else(|| NluError::Dataset {
                line,
                message: format!("unknown label `{}`", cells[0]),
            })?;
            Ok(YesNoExample {
                label,
                question: cells[1].trim().to_string(),
                response: cells[2].trim().to_string(),
            })
        })
        .collect()
}

pub fn parse_sentiment(text: &str) -> Result<Vec<SentimentExample>, NluError> {
    rows(text)
        .map(|(line, cells)| {
            if cells.len() != 2 {
                return Err(NluError::Dataset {
                    line,
                    message: format!("expected score, response; found {} columns", cells.len()),
                });
            }
            let score: f64 = cells[0].trim().parse().map_err(|_| NluError::Dataset {
                line,
                message: format!("bad score `{}`", cells[0]),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(NluError::Dataset {
                    line,
                    message: format!("score {score} outside [0, 1]"),
                });
            }
            Ok(SentimentExample {
                score,
                response: cells[1].trim().to_string(),
            })
        })
        .collect()
}

/// Seeded shuffle, then the first `test_fraction` of items become the
/// held-out split.
pub fn holdout_split<T: Clone>(items: &[T], test_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((items.len() as f64) * test_fraction).round() as usize;
    let test = order[..n_test].iter().map(|&i| items[i].clone()).collect();
    let train = order[n_test..].iter().map(|&i| items[i].clone()).collect();
    (train, test)
}

pub fn yesno_samples(examples: &[YesNoExample], embedder: &dyn Embedder) -> Result<Vec<(Vec<f64>, Target)>, NluError> {
    examples
        .iter()
        .map(|ex| {
            let text = format!("{}{QUESTION_SEPARATOR}{}", ex.question, ex.response);
            Ok((embedder.embed(&text)?.into_inner(), Target::Class(ex.label.index())))
        })
        .collect()
}

pub fn sentiment_samples(
    examples: &[SentimentExample],
    embedder: &dyn Embedder,
) -> Result<Vec<(Vec<f64>, Target)>, NluError> {
    examples
        .iter()
        .map(|ex| Ok((embedder.embed(&ex.response)?.into_inner(), Target::Score(ex.score))))
        .collect()
}

/// Fresh seeded 3-way classifier trained on the examples.
pub fn train_yesno(
    examples: &[YesNoExample],
    embedder: &dyn Embedder,
    hidden: usize,
    params: &TrainParams,
) -> Result<(FfnModel, Vec<f64>), NluError> {
    let samples = yesno_samples(examples, embedder)?;
    let mut model = FfnModel::random(embedder.dim(), hidden, 3, OutputHead::Softmax, params.seed)?;
    let losses = model.train(&samples, params)?;
    Ok((model, losses))
}

/// Fresh seeded sentiment regressor trained on the examples.
pub fn train_sentiment(
    examples: &[SentimentExample],
    embedder: &dyn Embedder,
    hidden: usize,
    params: &TrainParams,
) -> Result<(FfnModel, Vec<f64>), NluError> {
    let samples = sentiment_samples(examples, embedder)?;
    let mut model = FfnModel::random(embedder.dim(), hidden, 1, OutputHead::Sigmoid, params.seed)?;
    let losses = model.train(&samples, params)?;
    Ok((model, losses))
}

/// Fraction of examples whose predicted label matches.
pub fn yesno_accuracy(classifier: &YesNoClassifier, examples: &[YesNoExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let correct = examples
        .iter()
        .filter(|ex| classifier.classify(&ex.question, &ex.response).label == ex.label)
        .count();
    correct as f64 / examples.len() as f64
}

/// Mean absolute error of a sentiment model on the examples.
pub fn sentiment_mae(model: &FfnModel, embedder: &dyn Embedder, examples: &[SentimentExample]) -> Result<f64, NluError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in examples {
        let input = embedder.embed(&ex.response)?;
        total += (model.forward(input.values())?[0] - ex.score).abs();
    }
    Ok(total / examples.len() as f64)
}
