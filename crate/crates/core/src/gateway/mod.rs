//! Chat-completion client with retries, bounded parallelism and a
//! record/replay transcript cache.

mod transcript;
mod transport;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::patch::SampleId;
use crate::prompt::PromptBundle;

pub use transcript::{TranscriptRecord, TranscriptStore};
pub use transport::{DenyAll, HttpTransport, Outgoing, Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    #[default]
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        })
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            _ => Err(format!("unknown gateway mode `{s}` (expected live, record or replay)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before attempt `k + 1` is `backoff_base_ms * 2^(k - 1)`.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            backoff_base_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub mode: GatewayMode,
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
    pub transcript_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_output_tokens: 1024,
            credential_env: "OPENAI_API_KEY".into(),
            mode: GatewayMode::Replay,
            max_parallel: 4,
            retry: RetryPolicy::default(),
            timeout_secs: 120,
            transcript_dir: None,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if self.max_parallel < 1 {
            return bad("max_parallel must be at least 1");
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be at least 1");
        }
        if self.mode != GatewayMode::Live && self.transcript_dir.is_none() {
            return bad("record and replay modes need a transcript directory");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("environment variable {0} with the API credential is not set")]
    MissingCredential(String),
    #[error("gave up after {attempts} attempts: {last}")]
    TransientExhausted { attempts: u32, last: String },
    #[error("no transcript for bundle digest {0}")]
    ReplayMiss(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("invalid gateway configuration: {0}")]
    InvalidConfig(String),
    #[error("transcript store: {0}")]
    Transcript(String),
}

/// Chat-completion body with images as base64 data URLs.
pub fn wire_request(bundle: &PromptBundle, cfg: &GatewayConfig) -> serde_json::Value {
    let mut user = vec![json!({"type": "text", "text": bundle.user_preamble})];
    for img in &bundle.images {
        user.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:image/png;base64,{}", img.base64)},
        }));
    }
    json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": user},
        ],
    })
}

/// The wire request with each image payload replaced by its SHA-256.
pub fn canonical_request(bundle: &PromptBundle, cfg: &GatewayConfig) -> serde_json::Value {
    let mut v = wire_request(bundle, cfg);
    if let Some(parts) = v["messages"][1]["content"].as_array_mut() {
        for (p, img) in parts.iter_mut().filter(|p| p["type"] == "image_url").zip(&bundle.images) {
            p["image_url"]["url"] = json!(format!("sha256:{}", img.sha256));
        }
    }
    v
}

/// Extracts `choices[0].message.content`.
pub fn response_text(body: &str) -> Result<String, GatewayError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(format!("not JSON: {e}")))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| GatewayError::MalformedResponse("no choices[0].message.content".into()))?;
    if text.trim().is_empty() {
        return Err(GatewayError::MalformedResponse("empty content".into()));
    }
    Ok(text.to_string())
}

fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if s.len() >= 4 => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    pub text: String,
    /// Transport calls made; 0 when served from the transcript store.
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub sample_id: SampleId,
    pub digest: String,
    pub attempts: u32,
    pub result: Result<String, GatewayError>,
}

pub struct Gateway {
    cfg: GatewayConfig,
    transport: Arc<dyn Transport>,
    store: Option<TranscriptStore>,
    credential: Option<String>,
    requests: AtomicU64,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("cfg", &self.cfg)
            .field("credential", &self.credential.as_ref().map(|_| "[REDACTED]"))
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Reads the credential from `cfg.credential_env` (not needed for replay).
    pub fn from_env(cfg: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        let credential = std::env::var(&cfg.credential_env).ok().filter(|s| !s.is_empty());
        Self::with_credential(cfg, transport, credential)
    }

    pub fn with_credential(
        cfg: GatewayConfig,
        transport: Arc<dyn Transport>,
        credential: Option<String>,
    ) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let store = cfg.transcript_dir.as_ref().map(TranscriptStore::new);
        Ok(Gateway {
            cfg,
            transport,
            store,
            credential,
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn store(&self) -> Option<&TranscriptStore> {
        self.store.as_ref()
    }

    /// Transport calls made so far.
    pub fn requests_sent(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn classify(&self, bundle: &PromptBundle) -> Result<Classified, GatewayError> {
        let (r, attempts) = self.classify_counted(bundle);
        r.map(|text| Classified { text, attempts })
    }

    fn classify_counted(&self, bundle: &PromptBundle) -> (Result<String, GatewayError>, u32) {
        match self.cfg.mode {
            GatewayMode::Replay => (self.replay(&bundle.digest), 0),
            GatewayMode::Live => self.call(bundle),
            GatewayMode::Record => {
                let (r, attempts) = self.call(bundle);
                let r = r.and_then(|text| {
                    let store = self.store.as_ref().expect("validated: record mode has a store");
                    let rec = TranscriptRecord {
                        digest: bundle.digest.clone(),
                        model: self.cfg.model.clone(),
                        request: canonical_request(bundle, &self.cfg),
                        response: text.clone(),
                        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    };
                    store.put(&rec).map_err(|e| GatewayError::Transcript(e.to_string()))?;
                    Ok(text)
                });
                (r, attempts)
            }
        }
    }

    fn replay(&self, digest: &str) -> Result<String, GatewayError> {
        let store = self.store.as_ref().expect("validated: replay mode has a store");
        match store.get(digest) {
            Ok(Some(rec)) => {
                if rec.model != self.cfg.model {
                    log::warn!("transcript {digest} was recorded with model {}", rec.model);
                }
                Ok(rec.response)
            }
            Ok(None) => Err(GatewayError::ReplayMiss(digest.to_string())),
            Err(e) => Err(GatewayError::Transcript(format!("{}: {e}", store.path(digest).display()))),
        }
    }

    fn call(&self, bundle: &PromptBundle) -> (Result<String, GatewayError>, u32) {
        let Some(credential) = self.credential.as_deref() else {
            return (Err(GatewayError::MissingCredential(self.cfg.credential_env.clone())), 0);
        };
        let body = wire_request(bundle, &self.cfg);
        let req = Outgoing {
            endpoint: &self.cfg.endpoint,
            credential,
            body: &body,
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(&req) {
                Ok(body) => return (response_text(&body), attempts),
                Err(e) => {
                    let msg = redact(&e.to_string(), Some(credential));
                    if !e.is_transient() {
                        return (Err(GatewayError::Rejected(msg)), attempts);
                    }
                    if attempts >= self.cfg.retry.max_attempts {
                        return (Err(GatewayError::TransientExhausted { attempts, last: msg }), attempts);
                    }
                    log::info!("sample {}: attempt {attempts} failed ({msg}), retrying", bundle.sample_id);
                    let delay = self.cfg.retry.backoff_base_ms.saturating_mul(1 << (attempts - 1).min(16));
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }

    /// Classifies every bundle with at most `max_parallel` in flight. Results
    /// keep input order; a failure affects only its own entry.
    pub fn classify_batch(&self, bundles: &[PromptBundle]) -> Vec<BatchResult> {
        let slots: Mutex<Vec<Option<BatchResult>>> = Mutex::new(vec![None; bundles.len()]);
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_parallel.min(bundles.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(b) = bundles.get(i) else { break };
                    let (result, attempts) = self.classify_counted(b);
                    if let Err(e) = &result {
                        log::warn!("sample {}: {e}", b.sample_id);
                    }
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(BatchResult {
                        sample_id: b.sample_id.clone(),
                        digest: b.digest.clone(),
                        attempts,
                        result,
                    });
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|r| r.expect("every index is processed"))
            .collect()
    }
}
