use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tracing::info;

use crate::dialogue::{DialogueEngine, EngineConfig};
use crate::llm::{ChatBackend, HttpLlm, HttpLlmConfig, MockLlm, PromptLibrary};
use crate::nlu::{Embedder, FfnModel, HashingEmbedder, HttpEmbedder, Lexicon, SentimentEstimator, YesNoClassifier, DEFAULT_EMBEDDING_DIM, POSITIVE_SENTIMENT};
use crate::response::ResponsePolicy;
use crate::scenario::{parse_scenario, validate};
use crate::spotdb::{GenreMap, SpotCatalog};

/// Environment variables named `TOURBOT_<KEY>` (key upper-cased) override
/// file values.
pub const ENV_PREFIX: &str = "TOURBOT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: bad value `{value}`")]
    BadValue { key: String, value: String },
    #[error("config key `{0}` is required")]
    Missing(&'static str),
    #[error("config key `{key}`: file {path} does not exist")]
    FileMissing { key: &'static str, path: PathBuf },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("loading {what}: {message}")]
    Load { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YesNoBackendKind {
    Pattern,
    Neural,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingConfig {
    Hashing { dim: usize },
    Http { base_url: String, model: String, dim: usize, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LlmConfig {
    Mock { seed: u64, failure_rate: f64 },
    Http(HttpLlmConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen: String,
    pub scenario: PathBuf,
    pub catalog: PathBuf,
    pub genre_map: PathBuf,
    pub lexicon: PathBuf,
    pub prompts: PathBuf,
    pub yesno_backend: YesNoBackendKind,
    pub yesno_model: Option<PathBuf>,
    pub sentiment_under50: PathBuf,
    pub sentiment_atleast50: PathBuf,
    pub embedding: EmbeddingConfig,
    pub llm: LlmConfig,
    pub positive_threshold: f64,
    pub explain_spots: bool,
    pub log_dir: PathBuf,
    pub session_ttl: Duration,
    pub cors_origin: String,
}

const KEYS: &[&str] = &[
    "listen",
    "scenario",
    "catalog",
    "genre_map",
    "lexicon",
    "prompts",
    "yesno_backend",
    "yesno_model",
    "sentiment_under50",
    "sentiment_atleast50",
    "embedding_backend",
    "embedding_dim",
    "embedding_url",
    "embedding_model",
    "embedding_timeout_ms",
    "llm_backend",
    "llm_seed",
    "llm_failure_rate",
    "llm_base_url",
    "llm_model",
    "llm_api_key_env",
    "llm_timeout_ms",
    "positive_threshold",
    "explain_spots",
    "log_dir",
    "session_ttl_secs",
    "cors_origin",
];

/// Parses `key: value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| ConfigError::Syntax {
            line: idx + 1,
            message: format!("expected `key: value`, got `{line}`"),
        })?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        pairs.insert(key, value.trim().to_string());
    }
    Ok(pairs)
}

impl ServiceConfig {
    /// Reads a config file, applies `TOURBOT_*` overrides and resolves
    /// relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut pairs = parse_pairs(&text)?;
        for key in KEYS {
            if let Ok(value) = std::env::var(format!("{ENV_PREFIX}{}", key.to_uppercase())) {
                pairs.insert(key.to_string(), value);
            }
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_pairs(&pairs, base)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>, base: &Path) -> Result<Self, ConfigError> {
        let get = |key: &str| pairs.get(key).map(String::as_str).filter(|v| !v.is_empty());
        let path = |key: &'static str| -> Result<PathBuf, ConfigError> {
            get(key).map(|v| base.join(v)).ok_or(ConfigError::Missing(key))
        };
        fn parsed<T: std::str::FromStr>(key: &str, value: Option<&str>, default: T) -> Result<T, ConfigError> {
            match value {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                }),
            }
        }
        let bad = |key: &str, value: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };

        let yesno_backend = match get("yesno_backend").unwrap_or("pattern") {
            "pattern" => YesNoBackendKind::Pattern,
            "neural" => YesNoBackendKind::Neural,
            other => return Err(bad("yesno_backend", other)),
        };
        let dim = parsed("embedding_dim", get("embedding_dim"), DEFAULT_EMBEDDING_DIM)?;
        let embedding = match get("embedding_backend").unwrap_or("hashing") {
            "hashing" => EmbeddingConfig::Hashing { dim },
            "http" => EmbeddingConfig::Http {
                base_url: get("embedding_url").ok_or(ConfigError::Missing("embedding_url"))?.to_string(),
                model: get("embedding_model").unwrap_or("text-embedding").to_string(),
                dim,
                timeout: Duration::from_millis(parsed("embedding_timeout_ms", get("embedding_timeout_ms"), 5_000)?),
            },
            other => return Err(bad("embedding_backend", other)),
        };
        let llm = match get("llm_backend").unwrap_or("mock") {
            "mock" => LlmConfig::Mock {
                seed: parsed("llm_seed", get("llm_seed"), 0)?,
                failure_rate: parsed("llm_failure_rate", get("llm_failure_rate"), 0.0)?,
            },
            "http" => {
                let defaults = HttpLlmConfig::default();
                LlmConfig::Http(HttpLlmConfig {
                    base_url: get("llm_base_url").unwrap_or(&defaults.base_url).to_string(),
                    model: get("llm_model").unwrap_or(&defaults.model).to_string(),
                    api_key_env: get("llm_api_key_env").unwrap_or(&defaults.api_key_env).to_string(),
                    timeout: Duration::from_millis(parsed("llm_timeout_ms", get("llm_timeout_ms"), 15_000)?),
                })
            }
            other => return Err(bad("llm_backend", other)),
        };
        let positive_threshold = parsed("positive_threshold", get("positive_threshold"), POSITIVE_SENTIMENT)?;
        if !(0.0..=1.0).contains(&positive_threshold) {
            return Err(bad("positive_threshold", &positive_threshold.to_string()));
        }
        Ok(ServiceConfig {
            listen: get("listen").unwrap_or("127.0.0.1:8080").to_string(),
            scenario: path("scenario")?,
            catalog: path("catalog")?,
            genre_map: path("genre_map")?,
            lexicon: path("lexicon")?,
            prompts: path("prompts")?,
            yesno_backend,
            yesno_model: get("yesno_model").map(|v| base.join(v)),
            sentiment_under50: path("sentiment_under50")?,
            sentiment_atleast50: path("sentiment_atleast50")?,
            embedding,
            llm,
            positive_threshold,
            explain_spots: parsed("explain_spots", get("explain_spots"), true)?,
            log_dir: get("log_dir").map_or_else(|| base.join("logs"), |v| base.join(v)),
            session_ttl: Duration::from_secs(parsed("session_ttl_secs", get("session_ttl_secs"), 30 * 60)?),
            cors_origin: get("cors_origin").unwrap_or("*").to_string(),
        })
    }

    /// Checks that every referenced file exists.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        let mut files: Vec<(&'static str, &Path)> = vec![
            ("scenario", &self.scenario),
            ("catalog", &self.catalog),
            ("genre_map", &self.genre_map),
            ("lexicon", &self.lexicon),
            ("prompts", &self.prompts),
            ("sentiment_under50", &self.sentiment_under50),
            ("sentiment_atleast50", &self.sentiment_atleast50),
        ];
        if self.yesno_backend == YesNoBackendKind::Neural {
            files.push(("yesno_model", self.yesno_model.as_deref().ok_or(ConfigError::Missing("yesno_model"))?));
        }
        for (key, path) in files {
            if !path.exists() {
                return Err(ConfigError::FileMissing {
                    key,
                    path: path.to_path_buf(),
                });
            }
        }
        Ok(())
    }

    pub fn llm_backend(&self) -> Arc<dyn ChatBackend> {
        match &self.llm {
            LlmConfig::Mock { seed, failure_rate } => Arc::new(MockLlm::new(*seed).with_failure_rate(*failure_rate)),
            LlmConfig::Http(c) => Arc::new(HttpLlm::new(c)),
        }
    }

    pub fn embedder(&self) -> Arc<dyn Embedder> {
        match &self.embedding {
            EmbeddingConfig::Hashing { dim } => Arc::new(HashingEmbedder::new(*dim)),
            EmbeddingConfig::Http {
                base_url,
                model,
                dim,
                timeout,
            } => Arc::new(HttpEmbedder::new(base_url, model, None, *dim, *timeout)),
        }
    }

    /// Loads every resource and builds an engine using the configured LLM.
    pub fn build_engine(&self) -> Result<DialogueEngine, ConfigError> {
        self.build_engine_with(self.llm_backend())
    }

    /// As [`build_engine`](Self::build_engine) but with a caller-supplied
    /// LLM backend (tests pass a call-counting mock).
    pub fn build_engine_with(&self, llm: Arc<dyn ChatBackend>) -> Result<DialogueEngine, ConfigError> {
        self.check_files()?;
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })
        };
        let load = |what: &'static str| move |e: &dyn std::fmt::Display| ConfigError::Load {
            what,
            message: e.to_string(),
        };

        let scenario = parse_scenario(&read(&self.scenario)?).map_err(|e| load("scenario")(&e))?;
        let report = validate(&scenario);
        if !report.is_empty() {
            let findings: Vec<String> = report.findings.iter().map(ToString::to_string).collect();
            return Err(load("scenario")(&findings.join("; ")));
        }
        let genres = GenreMap::parse(&read(&self.genre_map)?).map_err(|e| load("genre map")(&e))?;
        let catalog = SpotCatalog::load(&read(&self.catalog)?, &genres).map_err(|e| load("catalog")(&e))?;
        let embedder = self.embedder();
        let model = |path: &Path, what: &'static str| -> Result<FfnModel, ConfigError> {
            FfnModel::from_text(&read(path)?).map_err(|e| load(what)(&e))
        };
        let yes_no = match self.yesno_backend {
            YesNoBackendKind::Pattern => {
                YesNoClassifier::pattern(Lexicon::parse(&read(&self.lexicon)?).map_err(|e| load("lexicon")(&e))?)
            }
            YesNoBackendKind::Neural => {
                let path = self.yesno_model.as_deref().ok_or(ConfigError::Missing("yesno_model"))?;
                YesNoClassifier::neural(model(path, "yes/no model")?, embedder.clone()).map_err(|e| load("yes/no model")(&e))?
            }
        };
        let sentiment = SentimentEstimator::new(
            embedder,
            Some(model(&self.sentiment_under50, "sentiment model")?),
            Some(model(&self.sentiment_atleast50, "sentiment model")?),
        )
        .map_err(|e| load("sentiment models")(&e))?;
        let prompts = PromptLibrary::load_dir(&self.prompts).map_err(|e| load("prompts")(&e))?;
        info!(scenario = %self.scenario.display(), spots = catalog.len(), "resources loaded");
        Ok(DialogueEngine::new(
            Arc::new(scenario),
            Arc::new(catalog),
            Arc::new(yes_no),
            Arc::new(sentiment),
            ResponsePolicy::new(llm, Arc::new(prompts)),
            EngineConfig {
                positive_threshold: self.positive_threshold,
                explain_spots: self.explain_spots,
                ..EngineConfig::default()
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "scenario: s.tsv\ncatalog: c.csv\ngenre_map: g.tsv\nlexicon: l.txt\nprompts: p\n\
                           sentiment_under50: u.ffn\nsentiment_atleast50: a.ffn\n";

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = ServiceConfig::from_pairs(&parse_pairs(MINIMAL).unwrap(), Path::new("/etc/tourbot")).unwrap();
        assert_eq!(cfg.scenario, PathBuf::from("/etc/tourbot/s.tsv"));
        assert_eq!(cfg.positive_threshold, POSITIVE_SENTIMENT);
        assert_eq!(cfg.session_ttl, Duration::from_secs(1800));
        assert_eq!(cfg.llm, LlmConfig::Mock { seed: 0, failure_rate: 0.0 });
        assert_eq!(cfg.yesno_backend, YesNoBackendKind::Pattern);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_pairs("listen 1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_pairs("colour: red"), Err(ConfigError::UnknownKey(_))));
        let mut pairs = parse_pairs(MINIMAL).unwrap();
        pairs.insert("positive_threshold".into(), "1.5".into());
        assert!(matches!(ServiceConfig::from_pairs(&pairs, Path::new(".")), Err(ConfigError::BadValue { .. })));
        pairs.remove("positive_threshold");
        pairs.remove("catalog");
        assert!(matches!(ServiceConfig::from_pairs(&pairs, Path::new(".")), Err(ConfigError::Missing("catalog"))));
    }

    #[test]
    fn missing_files_are_reported() {
        let cfg = ServiceConfig::from_pairs(&parse_pairs(MINIMAL).unwrap(), Path::new("/nonexistent")).unwrap();
        assert!(matches!(cfg.check_files(), Err(ConfigError::FileMissing { key: "scenario", .. })));
    }
}
