use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{Embedder, FfnModel, NluError, OutputHead, YesNoLabel};
use crate::scenario::Pattern;

/// Joins question and response before embedding for the neural backend.
pub const QUESTION_SEPARATOR: &str = " ⟂ ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YesNoScores {
    #[serde(rename = "Yes")]
    pub yes: f64,
    #[serde(rename = "No")]
    pub no: f64,
    #[serde(rename = "Other")]
    pub other: f64,
}

impl YesNoScores {
    pub fn get(&self, label: YesNoLabel) -> f64 {
        match label {
            YesNoLabel::Yes => self.yes,
            YesNoLabel::No => self.no,
            YesNoLabel::Other => self.other,
        }
    }

    pub fn sum(&self) -> f64 {
        self.yes + self.no + self.other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YesNoResult {
    pub label: YesNoLabel,
    pub scores: YesNoScores,
}

impl YesNoResult {
    /// Normalizes non-negative weights and takes the argmax, with ties
    /// going to the earlier label in Yes, No, Other order.
    pub fn from_weights(weights: [f64; 3]) -> Self {
        let total: f64 = weights.iter().sum();
        let probs = if total > 0.0 && total.is_finite() {
            weights.map(|w| w / total)
        } else {
            [0.0, 0.0, 1.0]
        };
        let mut label = YesNoLabel::Yes;
        for candidate in YesNoLabel::ALL {
            if probs[candidate.index()] > probs[label.index()] {
                label = candidate;
            }
        }
        YesNoResult {
            label,
            scores: YesNoScores {
                yes: probs[0],
                no: probs[1],
                other: probs[2],
            },
        }
    }

    /// The degenerate-input answer: certain Other.
    pub fn other() -> Self {
        YesNoResult {
            label: YesNoLabel::Other,
            scores: YesNoScores {
                yes: 0.0,
                no: 0.0,
                other: 1.0,
            },
        }
    }
}

/// Affirmative and negative candidate phrases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    pub affirm: Vec<Pattern>,
    pub negate: Vec<Pattern>,
}

impl Lexicon {
    /// Lexicon file: `[affirm]` and `[negate]` section headers, one
    /// pattern per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, NluError> {
        let mut lexicon = Lexicon::default();
        let mut section: Option<bool> = None;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[affirm]" => section = Some(true),
                "[negate]" => section = Some(false),
                _ if line.starts_with('[') => {
                    return Err(NluError::Lexicon {
                        line: idx + 1,
                        message: format!("unknown section {line}"),
                    })
                }
                _ => match section {
                    Some(true) => lexicon.affirm.push(Pattern::new(line)),
                    Some(false) => lexicon.negate.push(Pattern::new(line)),
                    None => {
                        return Err(NluError::Lexicon {
                            line: idx + 1,
                            message: "pattern before any section".into(),
                        })
                    }
                },
            }
        }
        Ok(lexicon)
    }

    /// Counts matching affirm and negate patterns. More affirm hits means
    /// Yes, more negate hits means No, a draw (including no hits) means
    /// Other.
    pub fn classify(&self, response: &str) -> YesNoResult {
        let hits = |patterns: &[Pattern]| patterns.iter().filter(|p| p.matches(response)).count() as f64;
        let (affirm, negate) = (hits(&self.affirm), hits(&self.negate));
        // Balanced evidence (including none at all) leans to Other.
        let other = if affirm == negate { affirm + 1.0 } else { 0.0 };
        YesNoResult::from_weights([affirm + 0.5, negate + 0.5, other + 0.5])
    }
}

pub enum YesNoBackend {
    Pattern(Lexicon),
    Neural {
        model: FfnModel,
        embedder: Arc<dyn Embedder>,
    },
}

pub struct YesNoClassifier {
    backend: YesNoBackend,
}

impl YesNoClassifier {
    pub fn pattern(lexicon: Lexicon) -> Self {
        YesNoClassifier {
            backend: YesNoBackend::Pattern(lexicon),
        }
    }

    pub fn neural(model: FfnModel, embedder: Arc<dyn Embedder>) -> Result<Self, NluError> {
        if model.head() != OutputHead::Softmax || model.output_dim() != 3 {
            return Err(NluError::WrongHead(format!(
                "yes/no needs a 3-way softmax, got {} outputs with {}",
                model.output_dim(),
                model.head()
            )));
        }
        if model.input_dim() != embedder.dim() {
            return Err(NluError::DimensionMismatch {
                model: model.input_dim(),
                embedder: embedder.dim(),
            });
        }
        Ok(YesNoClassifier {
            backend: YesNoBackend::Neural { model, embedder },
        })
    }

    pub fn backend(&self) -> &YesNoBackend {
        &self.backend
    }

    /// Never fails: empty responses and embedding failures come back as
    /// certain Other.
    pub fn classify(&self, question: &str, response: &str) -> YesNoResult {
        if response.trim().is_empty() {
            return YesNoResult::other();
        }
        match &self.backend {
            YesNoBackend::Pattern(lexicon) => lexicon.classify(response),
            YesNoBackend::Neural { model, embedder } => {
                let text = format!("{question}{QUESTION_SEPARATOR}{response}");
                let input = match embedder.embed(&text) {
                    Ok(v) => v,
                    Err(err) => {
                        warn!(%err, "yes/no embedding failed, answering Other");
                        return YesNoResult::other();
                    }
                };
                match model.forward(input.values()) {
                    Ok(probs) => YesNoResult::from_weights([probs[0], probs[1], probs[2]]),
                    Err(err) => {
                        warn!(%err, "yes/no forward pass failed, answering Other");
                        YesNoResult::other()
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::HashingEmbedder;

    fn lexicon() -> Lexicon {
        Lexicon::parse("[affirm]\nyes\ndefinitely\nsure*\n[negate]\nno\nno thanks\nnot really\n").unwrap()
    }

    #[test]
    fn lexicon_examples() {
        let c = YesNoClassifier::pattern(lexicon());
        assert_eq!(c.classify("Are you interested in Kinkaku-ji?", "Yes, definitely.").label, YesNoLabel::Yes);
        assert_eq!(c.classify("Are you interested?", "How much is admission?").label, YesNoLabel::Other);
        assert_eq!(c.classify("Shall we add it?", "no thanks").label, YesNoLabel::No);
        assert_eq!(c.classify("Shall we?", "Sure, why not").label, YesNoLabel::Yes);
        assert_eq!(c.classify("Shall we?", "yes and no").label, YesNoLabel::Other);
    }

    #[test]
    fn blank_response_is_certain_other() {
        let c = YesNoClassifier::pattern(lexicon());
        assert_eq!(c.classify("Q?", "   "), YesNoResult::other());
    }

    #[test]
    fn ties_prefer_yes_then_no() {
        assert_eq!(YesNoResult::from_weights([1.0, 1.0, 1.0]).label, YesNoLabel::Yes);
        assert_eq!(YesNoResult::from_weights([0.0, 2.0, 2.0]).label, YesNoLabel::No);
        assert_eq!(YesNoResult::from_weights([0.0, 0.0, 0.0]).label, YesNoLabel::Other);
    }

    #[test]
    fn lexicon_rejects_orphan_patterns() {
        assert!(matches!(Lexicon::parse("yes\n"), Err(NluError::Lexicon { line: 1, .. })));
        assert!(matches!(Lexicon::parse("[maybe]\n"), Err(NluError::Lexicon { line: 1, .. })));
    }

    #[test]
    fn neural_backend_checks_shapes() {
        let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::new(16));
        let wrong_dim = FfnModel::zeros(8, 4, 3, OutputHead::Softmax).unwrap();
        assert!(YesNoClassifier::neural(wrong_dim, embedder.clone()).is_err());
        let wrong_head = FfnModel::zeros(16, 4, 1, OutputHead::Sigmoid).unwrap();
        assert!(YesNoClassifier::neural(wrong_head, embedder.clone()).is_err());
        let ok = FfnModel::zeros(16, 4, 3, OutputHead::Softmax).unwrap();
        let c = YesNoClassifier::neural(ok, embedder).unwrap();
        let r = c.classify("q", "whatever");
        // Uniform output ties resolve to Yes.
        assert_eq!(r.label, YesNoLabel::Yes);
        assert!((r.scores.sum() - 1.0).abs() < 1e-12);
    }
}
