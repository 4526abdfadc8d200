//! Intention recognizers that drive state transitions: a three-way yes/no
//! classifier over (system question, user response) pairs and a sentiment
//! estimator with separate models for users under and over 50.

pub mod dataset;
mod embed;
pub mod ffn;
mod sentiment;
mod yesno;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{hash_bucket, tokenize, EmbedError, Embedder, EmbeddingVector, HashingEmbedder, HttpEmbedder, DEFAULT_EMBEDDING_DIM};
pub use ffn::{gradient_check, FfnError, FfnModel, OutputHead, Target, TrainParams};
pub use sentiment::{AgeBand, SentimentEstimator, SentimentScore, AGE_SWITCH_YEARS};
pub use yesno::{Lexicon, YesNoBackend, YesNoClassifier, YesNoResult, YesNoScores, QUESTION_SEPARATOR};

/// Sentiment at or above this value counts as positive for downstream
/// consumers (deep-dive gating, recommendation wording).
pub const POSITIVE_SENTIMENT: f64 = 0.6;

/// Default hidden width of both recognizers.
pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum YesNoLabel {
    Yes,
    No,
    Other,
}

impl YesNoLabel {
    /// Class order of the softmax head; also the tie-break order.
    pub const ALL: [YesNoLabel; 3] = [YesNoLabel::Yes, YesNoLabel::No, YesNoLabel::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            YesNoLabel::Yes => "Yes",
            YesNoLabel::No => "No",
            YesNoLabel::Other => "Other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        YesNoLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for YesNoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum NluError {
    #[error("no sentiment model loaded for band {0}")]
    MissingModel(AgeBand),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Ffn(#[from] FfnError),
    #[error("model expects {model} inputs but the embedder produces {embedder}")]
    DimensionMismatch { model: usize, embedder: usize },
    #[error("model has the wrong head: {0}")]
    WrongHead(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
}
