//! JSON-over-HTTP backends and the fallback policy around them.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{normalize_reply, Answer, BackendError, Exchange, OraclePercipient, Percipient, Query};
use crate::observation::Frame;

pub const ENDPOINT_ENV: &str = "VOXAGENT_BACKEND_URL";
pub const TIMEOUT_ENV: &str = "VOXAGENT_BACKEND_TIMEOUT_MS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Surface the first error.
    Fail,
    /// Retry this many extra times, then surface the error.
    Retry { attempts: u32 },
    /// Answer from frame ground truth when the backend errors.
    Oracle,
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        FallbackPolicy::Retry { attempts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub fallback: FallbackPolicy,
}

fn default_timeout() -> u64 {
    30_000
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        BackendConfig {
            endpoint: endpoint.into(),
            timeout_ms: default_timeout(),
            fallback: FallbackPolicy::default(),
        }
    }

    /// Reads the endpoint and timeout from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .map_err(|_| BackendError::NotConfigured(format!("{ENDPOINT_ENV} is not set")))?;
        let mut cfg = BackendConfig::new(endpoint);
        if let Ok(t) = std::env::var(TIMEOUT_ENV) {
            cfg.timeout_ms = t
                .parse()
                .map_err(|_| BackendError::NotConfigured(format!("{TIMEOUT_ENV} is not a number")))?;
        }
        Ok(cfg)
    }

    /// Reads a JSON configuration file.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::NotConfigured(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::NotConfigured(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercipientRequest {
    pub frame: Frame,
    pub question: String,
    pub history: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Body for `/v1/plan` and `/v1/parse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessagesRequest {
    pub frame: Option<Frame>,
    pub messages: Vec<Message>,
    pub history: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub answer: String,
}

/// Blocking HTTP client for the backend wire protocol.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    agent: ureq::Agent,
    base: String,
}

impl RemoteClient {
    pub fn new(config: &BackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteClient {
            agent,
            base: config.endpoint.trim_end_matches('/').to_string(),
        }
    }

    /// POSTs `body` to `path` and returns the `answer` string.
    pub fn post<T: Serialize>(&self, path: &str, body: &T) -> Result<String, BackendError> {
        let url = format!("{}{}", self.base, path);
        let mut resp = self.agent.post(&url).send_json(body).map_err(map_err)?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(BackendError::Status(status));
        }
        let text = resp.body_mut().read_to_string().map_err(map_err)?;
        let reply: Reply = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        Ok(reply.answer)
    }
}

fn map_err(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(s) => BackendError::Status(s),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut || io.kind() == std::io::ErrorKind::WouldBlock => {
            BackendError::Timeout
        }
        other => BackendError::Transport(other.to_string()),
    }
}

/// Percipient served over `POST /v1/percipient`.
#[derive(Debug, Clone)]
pub struct RemotePercipient {
    client: RemoteClient,
}

impl RemotePercipient {
    pub fn new(config: &BackendConfig) -> Self {
        RemotePercipient {
            client: RemoteClient::new(config),
        }
    }
}

impl Percipient for RemotePercipient {
    fn answer(&self, query: &Query, frame: &Frame) -> Result<Answer, BackendError> {
        let req = PercipientRequest {
            frame: frame.clone(),
            question: query.text.clone(),
            history: query.history.clone(),
        };
        let text = self.client.post("/v1/percipient", &req)?;
        Ok(Answer {
            verdict: normalize_reply(&text),
            evidence: None,
        })
    }
}

/// Applies a [`FallbackPolicy`] around any percipient.
pub struct FallbackPercipient<P> {
    inner: P,
    policy: FallbackPolicy,
}

impl<P: Percipient> FallbackPercipient<P> {
    pub fn new(inner: P, policy: FallbackPolicy) -> Self {
        FallbackPercipient { inner, policy }
    }
}

impl<P: Percipient> Percipient for FallbackPercipient<P> {
    fn answer(&self, query: &Query, frame: &Frame) -> Result<Answer, BackendError> {
        match self.policy {
            FallbackPolicy::Fail => self.inner.answer(query, frame),
            FallbackPolicy::Retry { attempts } => {
                let mut last = None;
                for _ in 0..=attempts {
                    match self.inner.answer(query, frame) {
                        Ok(a) => return Ok(a),
                        Err(e) => last = Some(e),
                    }
                }
                Err(last.expect("at least one attempt"))
            }
            FallbackPolicy::Oracle => self
                .inner
                .answer(query, frame)
                .or_else(|_| OraclePercipient.answer(query, frame)),
        }
    }
}
