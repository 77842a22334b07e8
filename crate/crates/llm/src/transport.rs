//! Chat-completion transports: an HTTP client, a content-addressed response
//! cache (read-through or replay-only), and a scripted mock.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LlmError, Result, TransportError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl TransportRequest {
    /// Hex sha256 of the request's JSON form.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("requests always serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    fn joined_content(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResponse {
    pub text: String,
    /// Finish reason reported by the endpoint (`stop`, `length`, ...).
    pub finish: String,
    pub latency_ms: u64,
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        (**self).complete(req)
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        (**self).complete(req)
    }
}

pub const ENV_ENDPOINT: &str = "TPOINT_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "TPOINT_LLM_API_KEY";
pub const ENV_MODEL: &str = "TPOINT_LLM_MODEL";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub min_interval: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: DEFAULT_ENDPOINT.into(),
            api_key: None,
            min_interval: Duration::from_millis(0),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }
}

impl HttpConfig {
    /// Defaults overridden by the endpoint and credential variables.
    pub fn from_env() -> Self {
        let mut cfg = HttpConfig::default();
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            cfg.endpoint = v;
        }
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        cfg
    }
}

pub fn model_from_env() -> String {
    std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string())
}

/// OpenAI-style `/chat/completions` client with request pacing and bounded
/// exponential-backoff retries on 429, 5xx and network errors.
pub struct HttpTransport {
    cfg: HttpConfig,
    agent: ureq::Agent,
    next_slot: Mutex<Instant>,
}

impl HttpTransport {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            cfg,
            agent,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    fn wait_for_slot(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().expect("pacing lock");
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + self.cfg.min_interval;
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn attempt(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        self.wait_for_slot();
        let started = Instant::now();
        let mut call = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(req).map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Http { status, body });
        }
        let v: serde_json::Value = serde_json::from_str(&body).map_err(|e| TransportError::Decode(e.to_string()))?;
        let choice = &v["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))?;
        Ok(TransportResponse {
            text: text.to_string(),
            finish: choice["finish_reason"].as_str().unwrap_or("unknown").to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        let mut delay = self.cfg.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(req) {
                Err(e) if e.is_transient() && tries < self.cfg.max_retries => {
                    log::warn!("request failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
                other => return other,
            }
        }
    }
}

/// Directory of `<sha256>.json` files, one per distinct request.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: TransportRequest,
    response: TransportResponse,
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ResponseCache {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, req: &TransportRequest) -> std::result::Result<Option<TransportResponse>, TransportError> {
        let path = self.path(&req.content_hash());
        match fs::read(&path) {
            Ok(bytes) => {
                let entry: CacheEntry =
                    serde_json::from_slice(&bytes).map_err(|e| TransportError::Io(format!("{}: {e}", path.display())))?;
                Ok(Some(entry.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(TransportError::Io(e.to_string())),
        }
    }

    /// Write via a temporary file and rename, so concurrent readers never see
    /// a partial entry.
    pub fn put(&self, req: &TransportRequest, resp: &TransportResponse) -> std::result::Result<(), TransportError> {
        let key = req.content_hash();
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let entry = CacheEntry {
            request: req.clone(),
            response: resp.clone(),
        };
        let io = |e: std::io::Error| TransportError::Io(e.to_string());
        fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("entries serialize")).map_err(io)?;
        fs::rename(&tmp, self.path(&key)).map_err(io)
    }
}

/// Serve from the cache, falling through to `inner` and recording on a miss.
pub struct CachedTransport<T> {
    inner: T,
    cache: ResponseCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<T: Transport> CachedTransport<T> {
    pub fn new(inner: T, cache: ResponseCache) -> Self {
        CachedTransport {
            inner,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

impl<T: Transport> Transport for CachedTransport<T> {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        if let Some(resp) = self.cache.get(req)? {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(resp);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let resp = self.inner.complete(req)?;
        self.cache.put(req, &resp)?;
        Ok(resp)
    }
}

/// Answers only from the cache; a miss is an error.
pub struct ReplayTransport {
    cache: ResponseCache,
}

impl ReplayTransport {
    pub fn new(cache: ResponseCache) -> Self {
        ReplayTransport { cache }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        self.cache
            .get(req)?
            .ok_or_else(|| TransportError::CacheMiss(req.content_hash()))
    }
}

/// One scripted reply. Fires when every `contains` string occurs in the
/// request's message text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub contains: Vec<String>,
    #[serde(default)]
    pub response: Option<String>,
    /// Fail with this message instead of answering.
    #[serde(default)]
    pub fail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    /// Reply when no rule fires; without one an unmatched request fails.
    #[serde(default)]
    pub default: Option<String>,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let script: MockScript = serde_json::from_str(text)?;
        for (i, r) in script.rules.iter().enumerate() {
            if r.response.is_some() == r.fail.is_some() {
                return Err(LlmError::Script(format!("rule {i} needs exactly one of `response` and `fail`")));
            }
        }
        Ok(script)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// First matching rule wins. Deterministic and free of I/O.
pub struct MockTransport {
    script: MockScript,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(script: MockScript) -> Self {
        MockTransport {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    /// Answer every request with the same text.
    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(MockScript {
            rules: Vec::new(),
            default: Some(text.into()),
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Transport for MockTransport {
    fn complete(&self, req: &TransportRequest) -> std::result::Result<TransportResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let content = req.joined_content();
        let rule = self
            .script
            .rules
            .iter()
            .find(|r| r.contains.iter().all(|needle| content.contains(needle.as_str())));
        let text = match rule {
            Some(MockRule { fail: Some(msg), .. }) => return Err(TransportError::Scripted(msg.clone())),
            Some(MockRule { response: Some(r), .. }) => r.clone(),
            _ => self
                .script
                .default
                .clone()
                .ok_or_else(|| TransportError::Scripted("no rule matched the request".into()))?,
        };
        Ok(TransportResponse {
            text,
            finish: "stop".into(),
            latency_ms: 0,
        })
    }
}
