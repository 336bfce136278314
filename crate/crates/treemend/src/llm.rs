//! Pluggable chat backends and the probability-based contamination metric.
//!
//! Two backends ship here: an HTTP client for OpenAI-compatible
//! chat-completion endpoints and a scripted backend that replays recorded
//! replies keyed by a stable hash of the rendered prompt. A recording
//! wrapper turns any live run into a replay file, which is how the test
//! fixtures were produced.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{ExampleBlock, PromptSpec};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("rate limited by backend")]
    RateLimited,
    #[error("no recorded reply for prompt hash {hash}")]
    MissingReplay { hash: String },
    #[error("http error: {0}")]
    Http(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("k percent must be in (0, 1], got {0}")]
    InvalidK(f64),
    #[error("token and logprob counts differ: {tokens} vs {logprobs}")]
    LengthMismatch { tokens: usize, logprobs: usize },
    #[error("logprob at position {position} is positive: {value}")]
    PositiveLogProb { position: usize, value: f64 },
}

impl LlmError {
    /// Errors worth retrying under the backoff policy.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Timeout(_) | LlmError::RateLimited)
            || matches!(self, LlmError::Http(msg) if msg.starts_with("status 5"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpOpenAiCompatible,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 250,
        }
    }
}

/// Declarative backend description, loadable from the run config. The API
/// key is only ever read from the named environment variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub credentials_env: String,
    /// Required for scripted backends.
    pub replay_path: Option<PathBuf>,
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            kind: BackendKind::HttpOpenAiCompatible,
            endpoint: "http://localhost:8000/v1".to_string(),
            model: "gpt-4".to_string(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            credentials_env: "OPENAI_API_KEY".to_string(),
            replay_path: None,
        }
    }
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature < 0.0 {
            return Err(LlmError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.kind == BackendKind::Scripted && self.replay_path.is_none() {
            return Err(LlmError::Config(
                "scripted backend requires a replay file path".to_string(),
            ));
        }
        Ok(())
    }

    /// Builds the concrete backend this spec describes.
    pub fn build(&self) -> Result<Box<dyn ChatBackend>, LlmError> {
        self.validate()?;
        match self.kind {
            BackendKind::Scripted => {
                let path = self.replay_path.as_ref().expect("validated above");
                Ok(Box::new(ScriptedBackend::load(path)?))
            }
            BackendKind::HttpOpenAiCompatible => Ok(Box::new(HttpBackend::new(self.clone()))),
        }
    }
}

/// A single completion request/response hop. Retrying lives in
/// [`complete`], so implementations only perform one attempt.
pub trait ChatBackend: Send + Sync {
    fn complete_once(&self, prompt_text: &str) -> Result<String, LlmError>;

    fn name(&self) -> &str {
        "backend"
    }
}

/// A completed call plus how many attempts it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

/// Renders the prompt and calls the backend, retrying transient failures
/// per the policy. At most `max_attempts` requests are issued.
pub fn complete(
    backend: &dyn ChatBackend,
    prompt: &PromptSpec,
    retry: &RetryPolicy,
) -> Result<Completion, LlmError> {
    complete_text(backend, &prompt.render(), retry)
}

pub fn complete_text(
    backend: &dyn ChatBackend,
    prompt_text: &str,
    retry: &RetryPolicy,
) -> Result<Completion, LlmError> {
    let max_attempts = retry.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete_once(prompt_text) {
            Ok(text) => {
                return Ok(Completion {
                    text,
                    attempts: attempt,
                })
            }
            Err(err) if err.is_transient() && attempt < max_attempts => {
                if retry.backoff_ms > 0 {
                    std::thread::sleep(Duration::from_millis(retry.backoff_ms * attempt as u64));
                }
            }
            Err(err) => return Err(err),
        }
    }
}

/// FNV-1a over the prompt text; the replay-file key.
pub fn prompt_hash(text: &str) -> String {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(PRIME);
    }
    format!("{hash:016x}")
}

/// One line of a replay file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub prompt_hash: String,
    pub prompt_text: String,
    pub reply_text: String,
}

/// Deterministic replay of recorded replies, keyed by prompt hash.
pub struct ScriptedBackend {
    replies: HashMap<String, String>,
    source: String,
}

impl ScriptedBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<ScriptedBackend, LlmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LlmError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut replies = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(line).map_err(|e| {
                LlmError::BadResponse(format!("replay line {}: {e}", i + 1))
            })?;
            if record.prompt_hash != prompt_hash(&record.prompt_text) {
                return Err(LlmError::BadResponse(format!(
                    "replay line {}: prompt hash does not match prompt text",
                    i + 1
                )));
            }
            replies.insert(record.prompt_hash, record.reply_text);
        }
        Ok(ScriptedBackend {
            replies,
            source: path.display().to_string(),
        })
    }

    pub fn from_records(records: Vec<ReplayRecord>) -> ScriptedBackend {
        ScriptedBackend {
            replies: records
                .into_iter()
                .map(|r| (r.prompt_hash, r.reply_text))
                .collect(),
            source: "memory".to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete_once(&self, prompt_text: &str) -> Result<String, LlmError> {
        let hash = prompt_hash(prompt_text);
        self.replies
            .get(&hash)
            .cloned()
            .ok_or(LlmError::MissingReplay { hash })
    }

    fn name(&self) -> &str {
        &self.source
    }
}

/// OpenAI-style chat-completions client over a blocking HTTP agent. The
/// first choice's message content is returned verbatim.
pub struct HttpBackend {
    spec: BackendSpec,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(spec: BackendSpec) -> HttpBackend {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(spec.timeout_secs))
            .build();
        HttpBackend { spec, agent }
    }

    fn url(&self) -> String {
        let base = self.spec.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete_once(&self, prompt_text: &str) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.spec.model,
            "temperature": self.spec.temperature,
            "max_tokens": self.spec.max_tokens,
            "messages": [{"role": "user", "content": prompt_text}],
        });
        let mut request = self.agent.post(&self.url());
        if let Ok(key) = std::env::var(&self.spec.credentials_env) {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        let response = match request.send_json(body) {
            Ok(response) => response,
            Err(ureq::Error::Status(429, _)) => return Err(LlmError::RateLimited),
            Err(ureq::Error::Status(code, response)) => {
                let text = response.into_string().unwrap_or_default();
                return Err(LlmError::Http(format!("status {code}: {text}")));
            }
            Err(ureq::Error::Transport(t)) => {
                if t.kind() == ureq::ErrorKind::Io {
                    return Err(LlmError::Timeout(Duration::from_secs(
                        self.spec.timeout_secs,
                    )));
                }
                return Err(LlmError::Http(t.to_string()));
            }
        };
        let json: serde_json::Value = response
            .into_json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        json["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                LlmError::BadResponse("missing choices[0].message.content".to_string())
            })
    }

    fn name(&self) -> &str {
        &self.spec.model
    }
}

/// Wraps a backend and appends every successful call to a replay file.
pub struct RecordingBackend {
    inner: Box<dyn ChatBackend>,
    sink: Mutex<fs::File>,
    path: String,
}

impl RecordingBackend {
    pub fn create(
        inner: Box<dyn ChatBackend>,
        path: impl AsRef<Path>,
    ) -> Result<RecordingBackend, LlmError> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| LlmError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(file),
            path: path.display().to_string(),
        })
    }
}

impl ChatBackend for RecordingBackend {
    fn complete_once(&self, prompt_text: &str) -> Result<String, LlmError> {
        let reply = self.inner.complete_once(prompt_text)?;
        let record = ReplayRecord {
            prompt_hash: prompt_hash(prompt_text),
            prompt_text: prompt_text.to_string(),
            reply_text: reply.clone(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        let mut sink = self.sink.lock().expect("recorder poisoned");
        writeln!(sink, "{line}").map_err(|e| LlmError::Io {
            path: self.path.clone(),
            message: e.to_string(),
        })?;
        Ok(reply)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Few-shot baseline parsing: renders the standard instruction with the
/// worked examples and asks for the target sentence.
pub fn few_shot_parse(
    sentence: &str,
    shots: &[(String, String)],
    backend: &dyn ChatBackend,
    retry: &RetryPolicy,
) -> Result<Completion, LlmError> {
    let prompt = few_shot_prompt(sentence, shots)?;
    complete(backend, &prompt, retry)
}

pub fn few_shot_prompt(
    sentence: &str,
    shots: &[(String, String)],
) -> Result<PromptSpec, LlmError> {
    if shots.is_empty() {
        return Err(LlmError::Config(
            "few-shot parsing requires at least one example".to_string(),
        ));
    }
    let mut prompt = PromptSpec::new(sentence);
    prompt.examples = shots
        .iter()
        .map(|(sentence, tree)| ExampleBlock::new(sentence.clone(), tree.clone()))
        .collect();
    Ok(prompt)
}

/// Per-token natural-log probabilities for a model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TokenLogProbs {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<TokenLogProbs, LlmError> {
        if tokens.len() != logprobs.len() {
            return Err(LlmError::LengthMismatch {
                tokens: tokens.len(),
                logprobs: logprobs.len(),
            });
        }
        if let Some((position, &value)) =
            logprobs.iter().enumerate().find(|(_, lp)| **lp > 0.0)
        {
            return Err(LlmError::PositiveLogProb { position, value });
        }
        Ok(TokenLogProbs { tokens, logprobs })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Min-K% probability: the mean negative log-probability of the
/// `ceil(k * n)` least likely tokens. Higher values mean the text is less
/// likely to have been memorized during pre-training.
pub fn mkp(lp: &TokenLogProbs, k_percent: f64) -> Result<f64, LlmError> {
    if lp.is_empty() {
        return Err(LlmError::EmptySequence);
    }
    if !(k_percent > 0.0 && k_percent <= 1.0) {
        return Err(LlmError::InvalidK(k_percent));
    }
    let n = lp.len();
    let take = ((k_percent * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted: Vec<f64> = lp.logprobs().to_vec();
    // Ascending: most negative (least likely) first.
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("logprobs are finite"));
    let sum: f64 = sorted[..take].iter().map(|lp| -lp).sum();
    Ok(sum / take as f64)
}
