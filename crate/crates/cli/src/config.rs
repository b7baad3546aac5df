//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use spanrefine::coref_scorer::DistanceMode;
use spanrefine::corpus::SyntheticConfig;
use spanrefine::encoder::EmbeddingProvider;
use spanrefine::model::ModelConfig;
use spanrefine::training::{OptimizerKind, TrainConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got {text:?}")]
    Syntax { path: PathBuf, line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("missing required key {0}")]
    Missing(&'static str),
    #[error("override {0:?} needs a value")]
    DanglingOverride(String),
    #[error("expected an override of the form --key value, got {0:?}")]
    BadOverride(String),
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

/// Every accepted key with its default; an empty default means unset.
const KEYS: &[(&str, &str)] = &[
    // data
    ("train_data", ""),
    ("dev_data", ""),
    ("input", ""),
    ("output", ""),
    ("gold", ""),
    ("pred", ""),
    ("checkpoint", ""),
    // embeddings
    ("embedding_mode", "hash"),
    ("embedding_file", ""),
    ("embedding_dim", "32"),
    ("embedding_seed", "0"),
    // model
    ("lstm_hidden", "32"),
    ("ffnn_hidden", "64"),
    ("ffnn_depth", "2"),
    ("pointer_hidden", "32"),
    ("feature_width", "4"),
    ("phi_width", "20"),
    ("max_span_width", "10"),
    ("mention_ratio", "0.4"),
    ("max_antecedents", "50"),
    ("max_attended_spans", "none"),
    ("distance_mode", "mention"),
    ("refine", "true"),
    ("char_cnn", "false"),
    // training
    ("learning_rate", "0.001"),
    ("epochs", "30"),
    ("seed", "0"),
    ("neg_term_enabled", "true"),
    ("neg_term_weight", "1.0"),
    ("prob_floor", "1e-7"),
    ("gradient_clip_norm", "5.0"),
    ("optimizer", "adam"),
    ("batch_size", "1"),
    // inspect
    ("doc_id", ""),
    ("top_k", "3"),
    // gen
    ("n_docs", "20"),
    ("tokens_per_doc", "60"),
    ("n_clusters", "2"),
    ("mentions_per_cluster", "3"),
    ("vocab_size", "50"),
    ("pronoun_mentions", "0"),
    ("cue_distance", "4"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: path.to_path_buf(),
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text, path)
    }

    /// Applies `--key value` pairs (also `--key=value`).
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), ConfigError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(key) = arg.strip_prefix("--") else {
                return Err(ConfigError::BadOverride(arg.clone()));
            };
            match key.split_once('=') {
                Some((k, v)) => self.set(k, v)?,
                None => {
                    let value = it.next().ok_or_else(|| ConfigError::DanglingOverride(arg.clone()))?;
                    self.set(key, value)?;
                }
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("known key")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let value = self.raw(key);
        value.parse().map_err(|e: T::Err| ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key).to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(ConfigError::Value {
                key: key.to_string(),
                value: other.to_string(),
                reason: "expected true or false".to_string(),
            }),
        }
    }

    pub fn path(&self, key: &'static str) -> Result<PathBuf, ConfigError> {
        match self.raw(key) {
            "" => Err(ConfigError::Missing(key)),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        Some(self.raw(key)).filter(|p| !p.is_empty()).map(PathBuf::from)
    }

    fn invalid(&self, key: &str, reason: &str) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            value: self.raw(key).to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig, ConfigError> {
        let max_attended_spans = match self.raw("max_attended_spans").to_ascii_lowercase().as_str() {
            "none" | "" | "0" => None,
            _ => Some(self.get("max_attended_spans")?),
        };
        let distance_mode = match self.raw("distance_mode").to_ascii_lowercase().as_str() {
            "mention" => DistanceMode::Mention,
            "token" => DistanceMode::Token,
            _ => return Err(self.invalid("distance_mode", "expected mention or token")),
        };
        Ok(ModelConfig {
            embedding_dim: self.get("embedding_dim")?,
            lstm_hidden: self.get("lstm_hidden")?,
            ffnn_hidden: self.get("ffnn_hidden")?,
            ffnn_depth: self.get("ffnn_depth")?,
            pointer_hidden: self.get("pointer_hidden")?,
            feature_width: self.get("feature_width")?,
            phi_width: self.get("phi_width")?,
            max_span_width: self.get("max_span_width")?,
            mention_ratio: self.get("mention_ratio")?,
            max_antecedents: self.get("max_antecedents")?,
            max_attended_spans,
            distance_mode,
            refine: self.flag("refine")?,
            char_cnn: self.flag("char_cnn")?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let optimizer: OptimizerKind = self
            .raw("optimizer")
            .parse()
            .map_err(|_| self.invalid("optimizer", "expected sgd or adam"))?;
        Ok(TrainConfig {
            learning_rate: self.get("learning_rate")?,
            epochs: self.get("epochs")?,
            seed: self.get("seed")?,
            neg_term_enabled: self.flag("neg_term_enabled")?,
            neg_term_weight: self.get("neg_term_weight")?,
            prob_floor: self.get("prob_floor")?,
            gradient_clip_norm: self.get("gradient_clip_norm")?,
            optimizer,
            batch_size: self.get("batch_size")?,
        })
    }

    pub fn synthetic_config(&self) -> Result<SyntheticConfig, ConfigError> {
        Ok(SyntheticConfig {
            n_docs: self.get("n_docs")?,
            tokens_per_doc: self.get("tokens_per_doc")?,
            n_clusters: self.get("n_clusters")?,
            mentions_per_cluster: self.get("mentions_per_cluster")?,
            vocab_size: self.get("vocab_size")?,
            pronoun_mentions: self.get("pronoun_mentions")?,
            cue_distance: self.get("cue_distance")?,
        })
    }

    /// Hash mode needs no file; file mode reads `embedding_file`.
    pub fn embedding_source(&self) -> Result<EmbeddingSource, ConfigError> {
        match self.raw("embedding_mode").to_ascii_lowercase().as_str() {
            "hash" => Ok(EmbeddingSource::Hash {
                dim: self.get("embedding_dim")?,
                seed: self.get("embedding_seed")?,
            }),
            "file" => Ok(EmbeddingSource::File(self.path("embedding_file")?)),
            _ => Err(self.invalid("embedding_mode", "expected hash or file")),
        }
    }
}

pub enum EmbeddingSource {
    Hash { dim: usize, seed: u64 },
    File(PathBuf),
}

impl EmbeddingSource {
    pub fn load(&self) -> spanrefine::Result<EmbeddingProvider> {
        match self {
            EmbeddingSource::Hash { dim, seed } => Ok(EmbeddingProvider::hashed(*dim, *seed)),
            EmbeddingSource::File(path) => EmbeddingProvider::from_file(path),
        }
    }
}
