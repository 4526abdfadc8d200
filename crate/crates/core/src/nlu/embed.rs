use std::time::Duration;

use serde_json::json;
use thiserror::Error;

use crate::text::fnv1a64;
use crate::wire::{JsonClient, WireError};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbedError {
    #[error("embedding service: {0}")]
    Wire(#[from] WireError),
    #[error("embedding has {got} dimensions, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Lowercased word tokens. Runs of alphanumerics (and apostrophes) form
/// words; every other non-space character is a one-character token, so
/// `"Yes, really?"` gives `["yes", ",", "really", "?"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() || c == '\'' {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Bucket and sign for one token: `h = fnv1a64(token)`, bucket `h % dim`,
/// sign negative when the top bit of `h` is set.
pub fn hash_bucket(token: &str, dim: usize) -> (usize, f64) {
    let h = fnv1a64(token.as_bytes());
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Feature-hashing baseline: signed token counts in `dim` buckets, L2
/// normalized. Text without tokens maps to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dim];
        for token in tokenize(text) {
            let (bucket, sign) = hash_bucket(&token, self.dim);
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector(values)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_text(text))
    }
}

/// Fetches vectors from an OpenAI-compatible `/v1/embeddings` endpoint.
pub struct HttpEmbedder {
    client: JsonClient,
    base_url: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, dim: usize, timeout: Duration) -> Self {
        HttpEmbedder {
            client: JsonClient::new(timeout),
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dim,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let body = json!({ "model": self.model, "input": text });
        let url = format!("{}/v1/embeddings", self.base_url);
        let response = self.client.post(&url, self.api_key.as_deref(), &body)?;
        let values: Vec<f64> = response["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| WireError::Malformed("missing data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| WireError::Malformed("non-numeric embedding value".into())))
            .collect::<Result<_, _>>()?;
        if values.len() != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Yes, really?"), vec!["yes", ",", "really", "?"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("q ⟂ r"), vec!["q", "⟂", "r"]);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = HashingEmbedder::default().embed_text("");
        assert_eq!(v.len(), DEFAULT_EMBEDDING_DIM);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn repetition_does_not_change_direction() {
        let e = HashingEmbedder::default();
        let a = e.embed_text("yes yes");
        let b = e.embed_text("yes");
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_words_touch_at_most_two_buckets() {
        let e = HashingEmbedder::default();
        let v = e.embed_text("kyoto temple");
        let nonzero: Vec<usize> = v
            .values()
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert!(nonzero.len() <= 2);
        // Independent recomputation of the documented hash.
        let mut expected = std::collections::BTreeSet::new();
        for word in ["kyoto", "temple"] {
            let mut h: u64 = 0xcbf29ce484222325;
            for b in word.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            expected.insert((h % 256) as usize);
        }
        assert_eq!(nonzero.into_iter().collect::<std::collections::BTreeSet<_>>(), expected);
    }
}
