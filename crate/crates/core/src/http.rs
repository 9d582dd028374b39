//! Minimal blocking HTTP plumbing shared by model providers and source wrappers.
//!
//! Everything that touches the network goes through [`HttpTransport`], so tests
//! can swap in [`ReplayTransport`], which serves recorded exchanges keyed by a
//! digest of the request.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    /// Not part of the digest; may carry credentials.
    #[serde(default, skip)]
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body.to_string()),
        }
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    /// Stable key for replay fixtures: method, URL and body, never headers.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(match self.method {
            Method::Get => b"GET ".as_slice(),
            Method::Post => b"POST ".as_slice(),
        });
        hasher.update(self.url.as_bytes());
        hasher.update(b"\n");
        if let Some(body) = &self.body {
            hasher.update(body.as_bytes());
        }
        short_hex(&hasher.finalize())
    }
}

pub(crate) fn short_hex(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("no recorded exchange for {url} (digest {digest})")]
    FixtureMiss { url: String, digest: String },
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;

    /// Live transports get politeness delays; replays do not.
    fn is_live(&self) -> bool {
        false
    }
}

/// Counting semaphore capping concurrent requests.
#[derive(Debug)]
pub struct Slots {
    free: Mutex<usize>,
    cond: Condvar,
}

pub struct SlotGuard<'a> {
    slots: &'a Slots,
}

impl Slots {
    pub fn new(capacity: usize) -> Self {
        Self {
            free: Mutex::new(capacity.max(1)),
            cond: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock();
        while *free == 0 {
            self.cond.wait(&mut free);
        }
        *free -= 1;
        SlotGuard { slots: self }
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.slots.free.lock() += 1;
        self.slots.cond.notify_one();
    }
}

/// Real network access via `reqwest`, at most `per_host` requests in flight per host.
pub struct LiveTransport {
    client: OnceLock<reqwest::blocking::Client>,
    per_host: usize,
    hosts: Mutex<HashMap<String, Arc<Slots>>>,
    timeout: Duration,
}

impl LiveTransport {
    pub fn new(per_host: usize) -> Self {
        Self {
            client: OnceLock::new(),
            per_host,
            hosts: Mutex::new(HashMap::new()),
            timeout: Duration::from_secs(60),
        }
    }

    fn slots_for(&self, url: &str) -> Arc<Slots> {
        let host = url::Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        self.hosts
            .lock()
            .entry(host)
            .or_insert_with(|| Arc::new(Slots::new(self.per_host)))
            .clone()
    }
}

impl Default for LiveTransport {
    fn default() -> Self {
        Self::new(3)
    }
}

impl HttpTransport for LiveTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let slots = self.slots_for(&request.url);
        let _slot = slots.acquire();
        // Built lazily so construction never happens inside an async runtime.
        let client = self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(self.timeout)
                .user_agent(concat!("curation/", env!("CARGO_PKG_VERSION")))
                .build()
                .expect("http client builds")
        });
        let mut builder = match request.method {
            Method::Get => client.get(&request.url),
            Method::Post => client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }

    fn is_live(&self) -> bool {
        true
    }
}

/// One recorded request/response pair, stored as `<digest>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exchange {
    pub request: HttpRequest,
    pub response: HttpResponse,
}

/// Serves recorded exchanges and logs every request it sees.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    exchanges: HashMap<String, HttpResponse>,
    log: Mutex<Vec<HttpRequest>>,
}

impl ReplayTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `<digest>.json` in `dir`, checking each name against its request.
    pub fn from_dir(dir: &Path) -> Result<Self, TransportError> {
        let mut replay = Self::new();
        replay.load_dir(dir)?;
        Ok(replay)
    }

    pub fn load_dir(&mut self, dir: &Path) -> Result<(), TransportError> {
        let entries = fs::read_dir(dir)
            .map_err(|e| TransportError::Fixture(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            let exchange: Exchange = serde_json::from_str(&text)
                .map_err(|e| TransportError::Fixture(format!("{}: {e}", path.display())))?;
            let digest = exchange.request.digest();
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem != digest {
                return Err(TransportError::Fixture(format!(
                    "{} is keyed {stem} but its request digests to {digest}",
                    path.display()
                )));
            }
            self.exchanges.insert(digest, exchange.response);
        }
        Ok(())
    }

    pub fn insert(&mut self, request: &HttpRequest, response: HttpResponse) {
        self.exchanges.insert(request.digest(), response);
    }

    /// Every request received, in order.
    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.lock().clone()
    }

    pub fn urls(&self) -> Vec<String> {
        self.log.lock().iter().map(|r| r.url.clone()).collect()
    }

    pub fn clear_log(&self) {
        self.log.lock().clear();
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

impl HttpTransport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.log.lock().push(request.clone());
        let digest = request.digest();
        self.exchanges
            .get(&digest)
            .cloned()
            .ok_or_else(|| TransportError::FixtureMiss {
                url: request.url.clone(),
                digest,
            })
    }
}

/// Writes `exchange` into `dir` under its request digest.
pub fn save_exchange(dir: &Path, exchange: &Exchange) -> Result<std::path::PathBuf, TransportError> {
    fs::create_dir_all(dir).map_err(|e| TransportError::Fixture(e.to_string()))?;
    let path = dir.join(format!("{}.json", exchange.request.digest()));
    let text = serde_json::to_string_pretty(exchange).map_err(|e| TransportError::Fixture(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| TransportError::Fixture(e.to_string()))?;
    Ok(path)
}

/// Wraps another transport and records every successful exchange to `dir`.
pub struct RecordingTransport<T> {
    inner: T,
    dir: std::path::PathBuf,
}

impl<T: HttpTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<std::path::PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<T: HttpTransport> HttpTransport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        save_exchange(
            &self.dir,
            &Exchange {
                request: HttpRequest {
                    headers: Vec::new(),
                    ..request.clone()
                },
                response: response.clone(),
            },
        )?;
        Ok(response)
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }
}
