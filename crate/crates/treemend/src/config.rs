//! Declarative run configuration: one JSON document describing paths,
//! correction and scoring settings, and the backend. Command-line flags
//! override file values; the environment is only consulted for the API
//! key named in the backend spec.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correction::CorrectionConfig;
use crate::llm::BackendSpec;
use crate::scoring::ScoringParams;
use crate::treebank::CorpusFormat;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("missing required path: {0}")]
    MissingPath(&'static str),
    #[error("path does not exist: {0}")]
    NoSuchPath(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Reference treebank in bracketed form (rule index and shot source).
    pub treebank: Option<PathBuf>,
    /// Sentences to parse or correct, one per line.
    pub input: Option<PathBuf>,
    /// Base predictions to correct, one tree per line.
    pub base: Option<PathBuf>,
    /// Predicted trees for scoring/analysis commands.
    pub pred: Option<PathBuf>,
    /// Gold trees for scoring/analysis commands.
    pub gold: Option<PathBuf>,
    /// Token logprob records for the contamination metric.
    pub logprobs: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// When set, every backend call is appended to this replay file.
    pub record: Option<PathBuf>,
    pub corpus_format: CorpusFormat,
    /// Examples in the baseline parsing prompt.
    pub shots: usize,
    /// Upper bound on concurrent sentence corrections.
    pub parallelism: usize,
    pub seed: u64,
    /// Fraction for the min-K% probability metric.
    pub k_percent: f64,
    /// Include per-sentence records in analysis reports.
    pub per_sentence: bool,
    pub correction: CorrectionConfig,
    pub scoring: ScoringParams,
    pub backend: BackendSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            treebank: None,
            input: None,
            base: None,
            pred: None,
            gold: None,
            logprobs: None,
            output: None,
            trace: None,
            record: None,
            corpus_format: CorpusFormat::OneTreePerLine,
            shots: 5,
            parallelism: 1,
            seed: 0,
            k_percent: 0.2,
            per_sentence: false,
            correction: CorrectionConfig::default(),
            scoring: ScoringParams::default(),
            backend: BackendSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Stable hash of the canonical JSON form, stamped into every report.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        crate::llm::prompt_hash(&canonical)
    }

    /// Checks that every referenced input path exists. Output paths are
    /// created later and are not required to exist.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        for path in [
            &self.treebank,
            &self.input,
            &self.base,
            &self.pred,
            &self.gold,
            &self.logprobs,
        ]
        .into_iter()
        .flatten()
        {
            if !path.exists() {
                return Err(ConfigError::NoSuchPath(path.display().to_string()));
            }
        }
        if let Some(replay) = &self.backend.replay_path {
            if !replay.exists() {
                return Err(ConfigError::NoSuchPath(replay.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn require(
        path: &Option<PathBuf>,
        name: &'static str,
    ) -> Result<PathBuf, ConfigError> {
        path.clone().ok_or(ConfigError::MissingPath(name))
    }
}
