//! Cache-first execution of rendered prompts.

mod backend;
mod cache;
mod retry;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use causal_audit_core::{PromptId, RenderedPrompt};
use serde::{Deserialize, Serialize};

pub use backend::{
    Backend, InjectedFailure, LiveBackend, ReplayBackend, ScriptEntry, ScriptedBackend, CREDENTIAL_ENV,
    DEFAULT_BASE_URL,
};
pub use cache::{transcript_key, TranscriptRecord, TranscriptStore};
pub use retry::{run_with_retry, RetryPolicy, Sleeper, ThreadSleeper};

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionRequest {
    pub prompt: RenderedPrompt,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(prompt: RenderedPrompt, model_name: &str) -> Self {
        CompletionRequest { prompt, model_name: model_name.to_string(), temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("model name is empty".into()));
        }
        Ok(())
    }

    pub fn key(&self) -> String {
        transcript_key(&self.model_name, &self.prompt.id.template_version, &self.prompt.text)
    }
}

/// Failure reported by a backend for a single call.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0} {1}")]
    Status(u16, String),
    #[error("credential rejected: {0}")]
    Auth(String),
    #[error("backend unreachable: {0}")]
    Unavailable(String),
    #[error("no scripted response for {0}")]
    NoScript(String),
    #[error("not in transcript cache")]
    CacheMiss,
}

impl BackendError {
    /// Timeouts, 429 and 5xx are worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Timeout | BackendError::Status(429 | 500..=599, _))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("transcript {key} is not cached and the replay backend never calls out")]
    CacheMissInReplayMode { key: String },
    #[error("scripted backend has no response for {0}")]
    NoScriptedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("transcript store: {0}")]
    Store(String),
}

impl GatewayError {
    fn from_backend(e: BackendError, attempts: u32, key: &str) -> Self {
        match e {
            BackendError::Status(429, _) => GatewayError::RateLimited { attempts },
            BackendError::Timeout => GatewayError::BackendUnavailable(format!("timed out after {attempts} attempts")),
            BackendError::Status(code, body) => {
                GatewayError::BackendUnavailable(format!("status {code} after {attempts} attempts {body}").trim().into())
            }
            BackendError::Auth(m) => GatewayError::AuthError(m),
            BackendError::Unavailable(m) => GatewayError::BackendUnavailable(m),
            BackendError::NoScript(m) => GatewayError::NoScriptedResponse(m),
            BackendError::CacheMiss => GatewayError::CacheMissInReplayMode { key: key.to_string() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub key: String,
    pub text: String,
    pub cached: bool,
    pub attempts: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchItem {
    pub id: PromptId,
    pub result: Result<Completion, GatewayError>,
}

/// Thread-safe front door to one backend and its transcript store.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    store: TranscriptStore,
    model: String,
    retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    backend_calls: AtomicUsize,
    retries: AtomicUsize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.kind())
            .field("model", &self.model)
            .field("store", &self.store.path())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, store: TranscriptStore, model: &str) -> Self {
        Gateway {
            backend,
            store,
            model: model.to_string(),
            retry: RetryPolicy::default(),
            sleeper: Arc::new(ThreadSleeper),
            backend_calls: AtomicUsize::new(0),
            retries: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, policy: RetryPolicy, sleeper: Arc<dyn Sleeper>) -> Self {
        self.retry = policy;
        self.sleeper = sleeper;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn store(&self) -> &TranscriptStore {
        &self.store
    }

    /// Calls that reached the backend, retries included.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::SeqCst)
    }

    /// Request for `prompt` with this gateway's model and default decoding.
    pub fn request(&self, prompt: RenderedPrompt) -> CompletionRequest {
        CompletionRequest::new(prompt, &self.model)
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        req.validate()?;
        let key = req.key();
        if let Some(r) = self.store.get(&key) {
            return Ok(Completion { key, text: r.response, cached: true, attempts: 0 });
        }
        if self.backend.kind() == BackendKind::Replay {
            return Err(GatewayError::CacheMissInReplayMode { key });
        }
        let (outcome, attempts) = run_with_retry(&self.retry, self.sleeper.as_ref(), || {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            self.backend.complete(req)
        });
        self.retries.fetch_add(attempts.saturating_sub(1) as usize, Ordering::SeqCst);
        let text = outcome.map_err(|e| GatewayError::from_backend(e, attempts, &key))?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        let record = TranscriptRecord::new(
            &req.model_name,
            &req.prompt.id.template_version,
            &req.prompt.text,
            &text,
            now_secs(),
            self.backend.kind(),
        );
        self.store.append(record).map_err(|e| GatewayError::Store(e.to_string()))?;
        Ok(Completion { key, text, cached: false, attempts })
    }

    /// Runs `reqs` on at most `parallelism` worker threads. Results come back
    /// in input order; a failing item never stops the others.
    pub fn run_batch(&self, reqs: &[CompletionRequest], parallelism: usize) -> Vec<BatchItem> {
        let workers = parallelism.max(1).min(reqs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Completion, GatewayError>>>> = reqs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = reqs.get(i) else { break };
                    let result = self.complete(req);
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        let items: Vec<BatchItem> = reqs
            .iter()
            .zip(slots)
            .map(|(req, slot)| BatchItem {
                id: req.prompt.id.clone(),
                result: slot.into_inner().expect("slot lock").expect("every index is visited"),
            })
            .collect();
        let cached = items.iter().filter(|i| i.result.as_ref().is_ok_and(|c| c.cached)).count();
        let failed = items.iter().filter(|i| i.result.is_err()).count();
        log::info!("batch of {}: {cached} cached, {failed} failed", items.len());
        items
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}
