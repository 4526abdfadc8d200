use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Embedder, FfnModel, NluError, OutputHead};

/// Users this age and older get the second model.
pub const AGE_SWITCH_YEARS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeBand {
    Under50,
    Atleast50,
}

impl AgeBand {
    pub fn from_age(age: u32) -> Self {
        if age < AGE_SWITCH_YEARS {
            AgeBand::Under50
        } else {
            AgeBand::Atleast50
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Under50 => "Under50",
            AgeBand::Atleast50 => "Atleast50",
        }
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How much the user seems to enjoy the dialogue, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub value: f64,
    pub model_id: AgeBand,
}

/// Two single-output sigmoid networks over a shared embedder, chosen by
/// the user's age.
pub struct SentimentEstimator {
    embedder: Arc<dyn Embedder>,
    under50: Option<FfnModel>,
    atleast50: Option<FfnModel>,
}

impl SentimentEstimator {
    pub fn new(
        embedder: Arc<dyn Embedder>,
        under50: Option<FfnModel>,
        atleast50: Option<FfnModel>,
    ) -> Result<Self, NluError> {
        for model in under50.iter().chain(atleast50.iter()) {
            if model.head() != OutputHead::Sigmoid || model.output_dim() != 1 {
                return Err(NluError::WrongHead(format!(
                    "sentiment needs a single sigmoid output, got {} outputs with {}",
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
        }
        Ok(SentimentEstimator {
            embedder,
            under50,
            atleast50,
        })
    }

    pub fn model(&self, band: AgeBand) -> Option<&FfnModel> {
        match band {
            AgeBand::Under50 => self.under50.as_ref(),
            AgeBand::Atleast50 => self.atleast50.as_ref(),
        }
    }

    pub fn estimate(&self, response: &str, age: u32) -> Result<SentimentScore, NluError> {
        let band = AgeBand::from_age(age);
        let model = self.model(band).ok_or(NluError::MissingModel(band))?;
        let input = self.embedder.embed(response)?;
        let value = model.forward(input.values())?[0].clamp(0.0, 1.0);
        Ok(SentimentScore { value, model_id: band })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::HashingEmbedder;

    fn estimator() -> SentimentEstimator {
        let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::new(32));
        SentimentEstimator::new(
            embedder,
            Some(FfnModel::random(32, 8, 1, OutputHead::Sigmoid, 1).unwrap()),
            Some(FfnModel::random(32, 8, 1, OutputHead::Sigmoid, 2).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn band_switches_at_fifty() {
        let e = estimator();
        assert_eq!(e.estimate("fun", 49).unwrap().model_id, AgeBand::Under50);
        assert_eq!(e.estimate("fun", 50).unwrap().model_id, AgeBand::Atleast50);
        assert_eq!(AgeBand::from_age(0), AgeBand::Under50);
        assert_eq!(AgeBand::from_age(80), AgeBand::Atleast50);
    }

    #[test]
    fn deterministic_and_bounded() {
        let e = estimator();
        let a = e.estimate("What a lovely garden!", 30).unwrap();
        let b = e.estimate("What a lovely garden!", 30).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.value));
    }

    #[test]
    fn missing_band_model_is_an_error() {
        let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::new(32));
        let e = SentimentEstimator::new(
            embedder,
            Some(FfnModel::zeros(32, 4, 1, OutputHead::Sigmoid).unwrap()),
            None,
        )
        .unwrap();
        assert_eq!(e.estimate("hi", 20).unwrap().value, 0.5);
        assert!(matches!(e.estimate("hi", 70), Err(NluError::MissingModel(AgeBand::Atleast50))));
    }
}
