use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

/// One chat-completion POST.
#[derive(Debug, Clone, Copy)]
pub struct Outgoing<'a> {
    pub endpoint: &'a str,
    pub credential: &'a str,
    pub body: &'a serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// The endpoint answered with a non-success status.
    Status { code: u16, body: String },
    /// No usable answer (connection, timeout, TLS).
    Network(String),
}

impl TransportError {
    /// Rate limiting, server-side failures and network trouble are worth
    /// another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Status { code, .. } => *code == 408 || *code == 429 || *code >= 500,
            TransportError::Network(_) => true,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Status { code, body } => write!(f, "HTTP {code}: {body}"),
            TransportError::Network(m) => write!(f, "network: {m}"),
        }
    }
}

pub trait Transport: Send + Sync {
    /// Returns the raw response body.
    fn send(&self, req: &Outgoing<'_>) -> Result<String, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &Outgoing<'_>) -> Result<String, TransportError> {
        let resp = self
            .client
            .post(req.endpoint)
            .bearer_auth(req.credential)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(serde_json::to_vec(req.body).map_err(|e| TransportError::Network(e.to_string()))?)
            .send()
            .map_err(|e| TransportError::Network(e.without_url().to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if status.is_success() {
            Ok(body)
        } else {
            Err(TransportError::Status {
                code: status.as_u16(),
                body: body.chars().take(500).collect(),
            })
        }
    }
}

/// Refuses every request and counts the attempts.
#[derive(Debug, Default)]
pub struct DenyAll {
    attempts: AtomicU64,
}

impl DenyAll {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for DenyAll {
    fn send(&self, _req: &Outgoing<'_>) -> Result<String, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Status {
            code: 403,
            body: "network access denied".into(),
        })
    }
}
