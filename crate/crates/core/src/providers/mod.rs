//! Completion and embedding models behind one contract.
//!
//! [`MockProvider`] replays recorded completions keyed by prompt digest and
//! embeds text with a token-hash bag of words, so every agent can run without
//! network access. [`RemoteProvider`] speaks the chat-completions wire format.

mod mock;
mod remote;
mod retry;

pub use mock::{
    load_fixture_file, mock_embed, save_fixture_file, CallRecord, FixedEmbedder, FixtureEntry,
    HashEmbedder, MockProvider, MockProviderBuilder, TableEmbedder, DEFAULT_MOCK_DIMENSION,
};
pub use remote::RemoteProvider;
pub use retry::RetryPolicy;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::http::{HttpTransport, LiveTransport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_text: Option<String>,
    pub user_text: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output: Option<u32>,
    pub model_name: String,
}

impl PromptSpec {
    pub fn new(user_text: impl Into<String>) -> Self {
        Self {
            system_text: None,
            user_text: user_text.into(),
            temperature: 0.0,
            max_output: None,
            model_name: String::new(),
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system_text = Some(system.into());
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model_name = model.into();
        self
    }

    /// The message text sent to the model. Sampling settings and model name
    /// are excluded so recorded fixtures survive model swaps.
    pub fn render(&self) -> String {
        match &self.system_text {
            Some(system) => format!("[system]\n{system}\n[user]\n{}", self.user_text),
            None => format!("[user]\n{}", self.user_text),
        }
    }

    /// Replay key: first 64 bits of SHA-256 over [`PromptSpec::render`], in hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.render().as_bytes());
        crate::http::short_hex(&hash)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub model_name: String,
    /// False when the model stopped at `max_output`.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("no recorded completion for prompt digest {digest}")]
    FixtureMiss { digest: String },
    #[error("embedder failure: {0}")]
    EmbedderFailure(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("provider request failed with status {status}: {message}")]
    Http { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Transient(_) | ProviderError::RateLimited { .. })
    }
}

pub trait CompletionModel: Send + Sync {
    fn complete(&self, prompt: &PromptSpec) -> Result<CompletionResult, ProviderError>;
}

pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    /// One vector per input, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;
}

pub(crate) fn check_embed_input(texts: &[String]) -> Result<(), ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::InvalidInput("nothing to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::InvalidInput(format!("text {i} is blank")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemoteApi,
    #[default]
    MockReplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_embed_model")]
    pub embed_model: String,
    #[serde(default = "default_dimension")]
    pub embed_dimension: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub base_backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Completion fixture files for mock replay.
    #[serde(default)]
    pub fixtures: Vec<PathBuf>,
    /// Mock replay fails on unknown prompts instead of echoing them.
    #[serde(default = "default_true")]
    pub strict: bool,
}

fn default_api_key_env() -> String {
    "CURATION_LLM_API_KEY".into()
}
fn default_model() -> String {
    "mock-replay".into()
}
fn default_embed_model() -> String {
    format!("mock-hash-{DEFAULT_MOCK_DIMENSION}")
}
fn default_dimension() -> usize {
    DEFAULT_MOCK_DIMENSION
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}
fn default_true() -> bool {
    true
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::MockReplay,
            endpoint: None,
            api_key_env: default_api_key_env(),
            model: default_model(),
            embed_model: default_embed_model(),
            embed_dimension: default_dimension(),
            max_attempts: default_attempts(),
            base_backoff_ms: default_backoff_ms(),
            max_in_flight: default_in_flight(),
            fixtures: Vec::new(),
            strict: true,
        }
    }
}

/// A completion model and an embedder built from one configuration.
#[derive(Clone)]
pub struct ProviderSet {
    pub completions: Arc<dyn CompletionModel>,
    pub embedder: Arc<dyn Embedder>,
}

impl ProviderConfig {
    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts.max(1),
            base_backoff: Duration::from_millis(self.base_backoff_ms),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.kind == ProviderKind::RemoteApi {
            if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                return Err(ProviderError::Config("remote_api needs an endpoint".into()));
            }
            if self.api_key_env.trim().is_empty() {
                return Err(ProviderError::Config("remote_api needs api_key_env".into()));
            }
        }
        if self.embed_dimension == 0 {
            return Err(ProviderError::Config("embed_dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ProviderSet, ProviderError> {
        self.build_with_transport(Arc::new(LiveTransport::default()))
    }

    pub fn build_with_transport(&self, transport: Arc<dyn HttpTransport>) -> Result<ProviderSet, ProviderError> {
        self.validate()?;
        match self.kind {
            ProviderKind::MockReplay => {
                let mut builder = MockProvider::builder()
                    .dimension(self.embed_dimension)
                    .strict(self.strict)
                    .model_name(&self.model);
                for path in &self.fixtures {
                    builder = builder.fixture_file(path)?;
                }
                let mock = Arc::new(builder.build());
                Ok(ProviderSet {
                    completions: mock.clone(),
                    embedder: mock,
                })
            }
            ProviderKind::RemoteApi => {
                let remote = Arc::new(RemoteProvider::from_config(self, transport)?);
                Ok(ProviderSet {
                    completions: remote.clone(),
                    embedder: remote,
                })
            }
        }
    }
}
