//! Text-generation providers: an OpenAI-style chat-completions client with
//! retry and rate limiting, and a scripted mock for offline runs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::prompt::text_hash;

pub const ENV_API_KEY: &str = "TSLF_API_KEY";
pub const ENV_BASE_URL: &str = "TSLF_BASE_URL";
pub const ENV_MODEL: &str = "TSLF_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub trial_seed: u64,
}

impl GenerationRequest {
    pub fn new(
        prompt: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
        trial_seed: u64,
    ) -> Result<Self, ProviderError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(ProviderError::new(
                ProviderErrorKind::Malformed,
                format!("temperature {temperature} outside [0, 2]"),
            ));
        }
        if max_tokens == 0 {
            return Err(ProviderError::new(ProviderErrorKind::Malformed, "max_tokens must be at least 1"));
        }
        Ok(GenerationRequest { prompt: prompt.into(), model: model.into(), temperature, max_tokens, trial_seed })
    }

    /// Stable hash of every request field.
    pub fn fingerprint(&self) -> String {
        let canonical = json!({
            "prompt": self.prompt,
            "model": self.model,
            "temperature": format!("{:?}", self.temperature),
            "max_tokens": self.max_tokens,
            "trial_seed": self.trial_seed,
        });
        text_hash(&canonical.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub latency_ms: u64,
    pub provider_meta: BTreeMap<String, Value>,
    pub request_fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Auth,
    RateLimited,
    Timeout,
    Malformed,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{kind:?}: {detail}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub detail: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, detail: impl Into<String>) -> Self {
        ProviderError { kind, detail: detail.into() }
    }
}

/// Why a single attempt failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptError {
    Auth(String),
    RateLimited(String),
    Timeout(String),
    Server(u16, String),
    Transport(String),
    /// A 4xx other than auth and rate limiting; the request itself is at fault.
    Rejected(u16, String),
    Malformed(String),
}

impl AttemptError {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            AttemptError::RateLimited(_)
                | AttemptError::Timeout(_)
                | AttemptError::Server(..)
                | AttemptError::Transport(_)
        )
    }

    fn into_final(self) -> ProviderError {
        match self {
            AttemptError::Auth(d) => ProviderError::new(ProviderErrorKind::Auth, d),
            AttemptError::Rejected(code, d) => {
                ProviderError::new(ProviderErrorKind::Malformed, format!("HTTP {code}: {d}"))
            }
            AttemptError::Malformed(d) => ProviderError::new(ProviderErrorKind::Malformed, d),
            AttemptError::RateLimited(d) => ProviderError::new(ProviderErrorKind::RateLimited, d),
            AttemptError::Timeout(d) => ProviderError::new(ProviderErrorKind::Timeout, d),
            AttemptError::Server(code, d) => {
                ProviderError::new(ProviderErrorKind::Exhausted, format!("HTTP {code}: {d}"))
            }
            AttemptError::Transport(d) => ProviderError::new(ProviderErrorKind::Exhausted, d),
        }
    }
}

impl fmt::Display for AttemptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttemptError::Auth(d) => write!(f, "auth: {d}"),
            AttemptError::RateLimited(d) => write!(f, "rate limited: {d}"),
            AttemptError::Timeout(d) => write!(f, "timeout: {d}"),
            AttemptError::Server(c, d) => write!(f, "HTTP {c}: {d}"),
            AttemptError::Transport(d) => write!(f, "transport: {d}"),
            AttemptError::Rejected(c, d) => write!(f, "HTTP {c}: {d}"),
            AttemptError::Malformed(d) => write!(f, "malformed response: {d}"),
        }
    }
}

/// One network (or scripted) round trip, without retries.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, req: &GenerationRequest, timeout: Duration) -> Result<String, AttemptError>;
}

/// Anything that turns a request into generated text.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResult, ProviderError>;
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_attempts: u32,
    pub jitter: bool,
    /// Wall-clock budget for one request across all attempts.
    pub request_budget: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
            jitter: true,
            request_budget: Duration::from_secs(120),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and mock runs.
    pub fn immediate() -> Self {
        RetryPolicy { base_delay: Duration::ZERO, jitter: false, ..Self::default() }
    }

    /// Delay before attempt `n + 1` after `n` failures (n >= 1).
    pub fn delay(&self, failures: u32) -> Duration {
        let exp = self.factor.powi(failures.saturating_sub(1) as i32);
        let mut secs = self.base_delay.as_secs_f64() * exp;
        if self.jitter && secs > 0.0 {
            secs *= rand::rng().random_range(0.5..1.5);
        }
        Duration::from_secs_f64(secs)
    }
}

/// Serializes dispatch to at most `per_minute` requests per minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        let interval = Duration::from_secs_f64(60.0 / f64::from(per_minute.max(1)));
        RateLimiter { interval, next: Mutex::new(Instant::now()) }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Retrying, rate-limited client over a backend.
pub struct LlmClient {
    backend: Box<dyn Backend>,
    policy: RetryPolicy,
    limiter: Option<RateLimiter>,
}

impl LlmClient {
    pub fn new(backend: impl Backend + 'static, policy: RetryPolicy) -> Self {
        LlmClient { backend: Box::new(backend), policy, limiter: None }
    }

    pub fn with_rate_limit(mut self, per_minute: u32) -> Self {
        self.limiter = Some(RateLimiter::per_minute(per_minute));
        self
    }
}

impl Provider for LlmClient {
    fn complete(&self, req: &GenerationRequest) -> Result<GenerationResult, ProviderError> {
        let started = Instant::now();
        let deadline = started + self.policy.request_budget;
        let mut attempts = 0u32;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(ProviderError::new(
                    ProviderErrorKind::Timeout,
                    format!("request budget of {:?} spent after {attempts} attempts", self.policy.request_budget),
                ));
            }
            attempts += 1;
            match self.backend.send(req, remaining) {
                Ok(text) => {
                    let mut meta = BTreeMap::new();
                    meta.insert("provider".to_string(), json!(self.backend.name()));
                    meta.insert("attempts".to_string(), json!(attempts));
                    meta.insert("model".to_string(), json!(req.model));
                    return Ok(GenerationResult {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        provider_meta: meta,
                        request_fingerprint: req.fingerprint(),
                    });
                }
                Err(e) if e.is_transient() && attempts < self.policy.max_attempts => {
                    let delay = self.policy.delay(attempts);
                    log::warn!("{} attempt {attempts} failed ({e}); retrying in {delay:?}", self.backend.name());
                    if Instant::now() + delay >= deadline {
                        return Err(ProviderError::new(
                            ProviderErrorKind::Timeout,
                            format!("request budget exhausted after {attempts} attempts: {e}"),
                        ));
                    }
                    std::thread::sleep(delay);
                }
                Err(e) if e.is_transient() => {
                    return Err(ProviderError::new(
                        ProviderErrorKind::Exhausted,
                        format!("gave up after {attempts} attempts: {e}"),
                    ));
                }
                Err(e) => return Err(e.into_final()),
            }
        }
    }
}

/// OpenAI-style `POST {base}/chat/completions` backend.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    network_attempts: AtomicU64,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.base_url)
            .field("has_api_key", &self.api_key.is_some())
            .finish()
    }
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).build();
        HttpBackend {
            base_url: base_url.into(),
            api_key: api_key.filter(|k| !k.is_empty()),
            agent: config.into(),
            network_attempts: AtomicU64::new(0),
        }
    }

    /// Reads `TSLF_API_KEY` and `TSLF_BASE_URL`.
    pub fn from_env() -> Self {
        let base = std::env::var(ENV_BASE_URL).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Self::new(base, std::env::var(ENV_API_KEY).ok())
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// Requests actually put on the wire so far.
    pub fn network_attempts(&self) -> u64 {
        self.network_attempts.load(Ordering::Relaxed)
    }
}

/// The exact chat-completions request body.
pub fn request_body(req: &GenerationRequest) -> Value {
    json!({
        "model": req.model,
        "messages": [{"role": "user", "content": req.prompt}],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

/// Reads the first choice's message content.
pub fn response_text(body: &str) -> Result<String, AttemptError> {
    let v: Value = serde_json::from_str(body).map_err(|e| AttemptError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| AttemptError::Malformed("missing choices[0].message.content".to_string()))
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn send(&self, req: &GenerationRequest, timeout: Duration) -> Result<String, AttemptError> {
        let Some(key) = &self.api_key else {
            return Err(AttemptError::Auth(format!("{ENV_API_KEY} is not set")));
        };
        self.network_attempts.fetch_add(1, Ordering::Relaxed);
        let result = self
            .agent
            .post(&self.endpoint())
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(request_body(req).to_string());
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => return Err(AttemptError::Timeout(t.to_string())),
            Err(e) => return Err(AttemptError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(t) => AttemptError::Timeout(t.to_string()),
            other => AttemptError::Transport(other.to_string()),
        })?;
        let snippet: String = body.chars().take(300).collect();
        match status {
            200..=299 => response_text(&body),
            401 | 403 => Err(AttemptError::Auth(format!("HTTP {status}"))),
            408 => Err(AttemptError::Timeout(format!("HTTP {status}"))),
            429 => Err(AttemptError::RateLimited(snippet)),
            500..=599 => Err(AttemptError::Server(status, snippet)),
            _ => Err(AttemptError::Rejected(status, snippet)),
        }
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    Reply { text: String },
    Failure { error: ScriptedFailure },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    Auth,
    RateLimited,
    Timeout,
    Server,
    Malformed,
}

impl ScriptedFailure {
    fn to_attempt(self) -> AttemptError {
        let d = "scripted".to_string();
        match self {
            ScriptedFailure::Auth => AttemptError::Auth(d),
            ScriptedFailure::RateLimited => AttemptError::RateLimited(d),
            ScriptedFailure::Timeout => AttemptError::Timeout(d),
            ScriptedFailure::Server => AttemptError::Server(503, d),
            ScriptedFailure::Malformed => AttemptError::Malformed(d),
        }
    }
}

/// Mock script file format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    /// Replies keyed by request fingerprint.
    #[serde(default)]
    pub by_fingerprint: BTreeMap<String, ScriptEntry>,
    /// Used when no fingerprint matches: entry `trial_seed % len`.
    #[serde(default)]
    pub fallback: Vec<ScriptEntry>,
    /// Failures injected into the first attempts, one per attempt, before any reply.
    #[serde(default)]
    pub fail_first: Vec<ScriptedFailure>,
}

impl MockScript {
    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    pub fn round_robin(texts: impl IntoIterator<Item = impl Into<String>>) -> Self {
        MockScript { fallback: texts.into_iter().map(|t| ScriptEntry::Text(t.into())).collect(), ..Self::default() }
    }
}

/// Deterministic scripted backend.
#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn send(&self, req: &GenerationRequest, _timeout: Duration) -> Result<String, AttemptError> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(f) = self.script.fail_first.get(call) {
            return Err(f.to_attempt());
        }
        let entry = self.script.by_fingerprint.get(&req.fingerprint()).or_else(|| {
            let n = self.script.fallback.len();
            (n > 0).then(|| &self.script.fallback[(req.trial_seed % n as u64) as usize])
        });
        match entry {
            Some(ScriptEntry::Text(t)) | Some(ScriptEntry::Reply { text: t }) => Ok(t.clone()),
            Some(ScriptEntry::Failure { error }) => Err(error.to_attempt()),
            None => Err(AttemptError::Malformed("mock script has no reply for this request".into())),
        }
    }
}

/// Mock client with no retry delays.
pub fn mock_client(script: MockScript) -> LlmClient {
    LlmClient::new(MockBackend::new(script), RetryPolicy::immediate())
}
