//! Completion backends: live HTTP, replay-only and scripted.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use causal_audit_core::prompt::parse_prompt;
use causal_audit_core::text::normalize_label;
use causal_audit_core::{Battery, Combo, PromptId};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{BackendError, BackendKind, CompletionRequest, GatewayError};

/// Environment variable holding the live backend credential.
pub const CREDENTIAL_ENV: &str = "CAUSAL_AUDIT_LLM_KEY";

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError>;
}

/// Chat-completions client.
pub struct LiveBackend {
    endpoint: String,
    credential: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend").field("endpoint", &self.endpoint).field("credential", &"<redacted>").finish()
    }
}

impl LiveBackend {
    pub fn new(base_url: &str, credential: &str, timeout: Duration) -> Result<Self, GatewayError> {
        if credential.trim().is_empty() {
            return Err(GatewayError::AuthError(format!("{CREDENTIAL_ENV} is empty")));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(LiveBackend {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            credential: credential.trim().to_string(),
            agent,
        })
    }

    /// Reads the credential from [`CREDENTIAL_ENV`].
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(CREDENTIAL_ENV).map_err(|_| GatewayError::AuthError(format!("{CREDENTIAL_ENV} is not set")))?;
        Self::new(base_url, &key, timeout)
    }
}

fn classify(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(code) => BackendError::Status(code, String::new()),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout,
        other => BackendError::Unavailable(other.to_string()),
    }
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt.text}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.credential))
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(classify)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("status {status}"))),
            _ => return Err(BackendError::Status(status, excerpt(&text))),
        }
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Unavailable(format!("bad response body: {e}")))?;
        doc.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Unavailable("response has no choices[0].message.content".into()))
    }
}

fn excerpt(s: &str) -> String {
    s.chars().take(200).collect()
}

/// Serves only what is already in the transcript store.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReplayBackend;

impl Backend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn complete(&self, _req: &CompletionRequest) -> Result<String, BackendError> {
        Err(BackendError::CacheMiss)
    }
}

/// Failure a script entry injects before (or instead of) responding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedFailure {
    RateLimited,
    ServerError,
    Timeout,
    Unavailable,
    Auth,
}

impl InjectedFailure {
    fn error(self) -> BackendError {
        match self {
            InjectedFailure::RateLimited => BackendError::Status(429, "scripted".into()),
            InjectedFailure::ServerError => BackendError::Status(503, "scripted".into()),
            InjectedFailure::Timeout => BackendError::Timeout,
            InjectedFailure::Unavailable => BackendError::Unavailable("scripted".into()),
            InjectedFailure::Auth => BackendError::Auth("scripted".into()),
        }
    }
}

/// One pattern of a script. `cause` and `effect` match by normalized name,
/// `"*"` matches anything; an absent `combo` matches every combination.
#[derive(Clone, Debug, Deserialize)]
pub struct ScriptEntry {
    pub battery: Battery,
    pub cause: String,
    pub effect: String,
    #[serde(default)]
    pub combo: Option<Combo>,
    #[serde(default)]
    pub response: Option<String>,
    /// Relative to the script file.
    #[serde(default)]
    pub response_file: Option<String>,
    #[serde(default)]
    pub fail_with: Option<InjectedFailure>,
    /// Calls that fail before the entry responds; `None` fails forever.
    #[serde(default)]
    pub fail_times: Option<usize>,
}

impl ScriptEntry {
    fn matches(&self, id: &PromptId) -> bool {
        let name = |pat: &str, value: &str| pat == "*" || normalize_label(pat) == normalize_label(value);
        self.battery == id.battery
            && name(&self.cause, &id.cause)
            && name(&self.effect, &id.effect)
            && self.combo.is_none_or(|c| c == id.combo)
    }
}

#[derive(Deserialize)]
struct ScriptDocument {
    #[serde(default)]
    model: Option<String>,
    entries: Vec<ScriptEntry>,
}

/// Canned responses keyed by prompt-id patterns. Prompt texts are mapped
/// back to ids with the template matcher, so a script only answers prompts
/// the templates could have produced. The first matching entry wins.
#[derive(Debug)]
pub struct ScriptedBackend {
    model: Option<String>,
    entries: Vec<(ScriptEntry, String)>,
    calls: Vec<AtomicUsize>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<(ScriptEntry, String)>) -> Self {
        let calls = entries.iter().map(|_| AtomicUsize::new(0)).collect();
        ScriptedBackend { model: None, entries, calls }
    }

    /// Loads a script document, resolving `response_file` paths.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let bad = |e: String| GatewayError::InvalidRequest(format!("script {}: {e}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let doc: ScriptDocument = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in doc.entries {
            let response = match (&e.response, &e.response_file) {
                (Some(r), _) => r.clone(),
                (None, Some(f)) => std::fs::read_to_string(dir.join(f)).map_err(|err| bad(format!("{f}: {err}")))?,
                (None, None) if e.fail_with.is_some() => String::new(),
                (None, None) => return Err(bad(format!("entry {} -> {} has no response", e.cause, e.effect))),
            };
            entries.push((e, response));
        }
        let mut backend = Self::new(entries);
        backend.model = doc.model;
        Ok(backend)
    }

    /// Model name declared by the script, if any.
    pub fn model(&self) -> Option<&str> {
        self.model.as_deref()
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let parsed = parse_prompt(&req.prompt.text)
            .ok_or_else(|| BackendError::NoScript("prompt text matches no template".into()))?;
        let i = self
            .entries
            .iter()
            .position(|(e, _)| e.matches(&parsed.id))
            .ok_or_else(|| BackendError::NoScript(parsed.id.key()))?;
        let (entry, response) = &self.entries[i];
        let n = self.calls[i].fetch_add(1, Ordering::SeqCst);
        match entry.fail_with {
            Some(f) if entry.fail_times.is_none_or(|t| n < t) => Err(f.error()),
            _ => Ok(response.clone()),
        }
    }
}
