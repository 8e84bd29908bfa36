//! Completion gateway: one call signature over live, replay and record backends.
//!
//! Replay never touches the network. Record forwards misses upstream and stores
//! the answer under the request digest so a later replay is exact.

mod cassette;
mod digest;
mod http;

pub use cassette::Cassette;
pub use digest::{canonical_bytes, estimate_tokens, request_digest};
pub use http::{extract_content, request_body, HttpUpstream};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};
use thiserror::Error;
use tracing::{debug, warn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_text: Option<String>,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
}

impl PromptRequest {
    pub fn user(text: impl Into<String>, max_tokens: u32, stop: Vec<String>) -> Self {
        PromptRequest {
            system_text: None,
            user_text: text.into(),
            temperature: 0.0,
            max_tokens,
            stop_sequences: stop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompletionSource {
    Cassette,
    Live,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub digest: String,
    pub source: CompletionSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    #[default]
    Replay,
    Record,
}

impl FromStr for BackendMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(BackendMode::Live),
            "replay" => Ok(BackendMode::Replay),
            "record" => Ok(BackendMode::Record),
            o => Err(format!("unknown backend `{o}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub mode: BackendMode,
    pub endpoint: String,
    pub api_key_env: String,
    pub model_name: String,
    pub cassette_path: Option<PathBuf>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub context_limit_tokens: usize,
    pub requests_per_minute: Option<u32>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: BackendMode::Replay,
            endpoint: "sim://oracle".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model_name: "sim-oracle".into(),
            cassette_path: None,
            timeout_ms: 60_000,
            max_retries: 4,
            retry_base_ms: 500,
            context_limit_tokens: 16_384,
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpstreamError {
    #[error("transient upstream failure: {0}")]
    Transient(String),
    #[error("rate limited")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("upstream rejected the request: {0}")]
    Fatal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("no cassette entry for digest {digest}")]
    CassetteMiss { digest: String },
    #[error("prompt needs ~{estimated} tokens but the context limit is {limit}")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("upstream failed after retries: {0}")]
    UpstreamFailure(String),
    #[error("rate limited after retries")]
    RateLimited,
    #[error("cassette {path} is corrupt: {reason}")]
    CassetteCorrupt { path: String, reason: String },
    #[error("cassette {path}: {reason}")]
    CassetteUnreadable { path: String, reason: String },
    #[error("gateway misconfigured: {0}")]
    Config(String),
}

/// Anything that can answer a prompt. Live HTTP, the simulated models and test fakes.
pub trait Upstream: Send + Sync {
    fn call(&self, model: &str, req: &PromptRequest) -> Result<String, UpstreamError>;
}

/// Closure-backed upstream, handy in tests.
pub struct FnUpstream<F>(pub F);

impl<F> Upstream for FnUpstream<F>
where
    F: Fn(&PromptRequest) -> Result<String, UpstreamError> + Send + Sync,
{
    fn call(&self, _model: &str, req: &PromptRequest) -> Result<String, UpstreamError> {
        (self.0)(req)
    }
}

/// Build the upstream named by the endpoint: `sim://...` or an HTTP base URL.
pub fn upstream_for(config: &GatewayConfig) -> Result<Box<dyn Upstream>, GatewayError> {
    if config.endpoint.starts_with("sim://") {
        let sim = crate::simlm::SimModel::from_endpoint(&config.endpoint)
            .map_err(GatewayError::Config)?;
        return Ok(Box::new(sim));
    }
    if !(config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://")) {
        return Err(GatewayError::Config(format!(
            "endpoint `{}` is neither sim:// nor http(s)://",
            config.endpoint
        )));
    }
    let key = std::env::var(&config.api_key_env).ok();
    Ok(Box::new(HttpUpstream::new(&config.endpoint, key, config.timeout_ms)))
}

struct RateGate {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateGate {
    fn wait(&self) {
        let sleep_for = {
            let mut next = self.next.lock().expect("rate gate lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !sleep_for.is_zero() {
            std::thread::sleep(sleep_for);
        }
    }
}

pub struct Gateway {
    config: GatewayConfig,
    upstream: Option<Box<dyn Upstream>>,
    cassette: RwLock<Cassette>,
    dirty: Mutex<bool>,
    rate: Option<RateGate>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("config", &self.config).finish()
    }
}

impl Gateway {
    /// Build from config, resolving the upstream from the endpoint.
    /// Replay mode never constructs an upstream.
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let upstream = match config.mode {
            BackendMode::Replay => None,
            _ => Some(upstream_for(&config)?),
        };
        Self::build(config, upstream)
    }

    /// Build with an explicit upstream; used for fakes in tests.
    pub fn with_upstream(config: GatewayConfig, upstream: Box<dyn Upstream>) -> Result<Self, GatewayError> {
        let up = match config.mode {
            BackendMode::Replay => None,
            _ => Some(upstream),
        };
        Self::build(config, up)
    }

    fn build(config: GatewayConfig, upstream: Option<Box<dyn Upstream>>) -> Result<Self, GatewayError> {
        let cassette = match (config.mode, &config.cassette_path) {
            (BackendMode::Live, _) => Cassette::new(&config.model_name),
            (BackendMode::Replay, None) | (BackendMode::Record, None) => {
                return Err(GatewayError::Config("replay and record need a cassette path".into()))
            }
            (BackendMode::Replay, Some(p)) => Cassette::load(p)?,
            (BackendMode::Record, Some(p)) => {
                if p.exists() {
                    Cassette::load(p)?
                } else {
                    Cassette::new(&config.model_name)
                }
            }
        };
        let rate = config.requests_per_minute.filter(|&r| r > 0).map(|r| RateGate {
            interval: Duration::from_secs_f64(60.0 / r as f64),
            next: Mutex::new(Instant::now()),
        });
        Ok(Gateway {
            config,
            upstream,
            cassette: RwLock::new(cassette),
            dirty: Mutex::new(false),
            rate,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn mode(&self) -> BackendMode {
        self.config.mode
    }

    pub fn context_limit(&self) -> usize {
        self.config.context_limit_tokens
    }

    pub fn cassette_len(&self) -> usize {
        self.cassette.read().expect("cassette lock").len()
    }

    pub fn complete(&self, req: &PromptRequest) -> Result<Completion, GatewayError> {
        let prompt_len = req.system_text.as_deref().map_or(0, estimate_tokens) + estimate_tokens(&req.user_text);
        let estimated = prompt_len + req.max_tokens as usize;
        if estimated > self.config.context_limit_tokens {
            return Err(GatewayError::ContextOverflow {
                estimated,
                limit: self.config.context_limit_tokens,
            });
        }
        let digest = request_digest(&self.config.model_name, req);
        match self.config.mode {
            BackendMode::Replay => {
                let c = self.cassette.read().expect("cassette lock");
                match c.get(&digest) {
                    Some(t) => Ok(Completion {
                        text: t.to_string(),
                        digest,
                        source: CompletionSource::Cassette,
                    }),
                    None => Err(GatewayError::CassetteMiss { digest }),
                }
            }
            BackendMode::Live => {
                let text = self.call_with_retry(req)?;
                Ok(Completion {
                    text,
                    digest,
                    source: CompletionSource::Live,
                })
            }
            BackendMode::Record => {
                if let Some(t) = self.cassette.read().expect("cassette lock").get(&digest) {
                    return Ok(Completion {
                        text: t.to_string(),
                        digest,
                        source: CompletionSource::Cassette,
                    });
                }
                let text = self.call_with_retry(req)?;
                self.cassette
                    .write()
                    .expect("cassette lock")
                    .entries
                    .insert(digest.clone(), text.clone());
                *self.dirty.lock().expect("dirty lock") = true;
                Ok(Completion {
                    text,
                    digest,
                    source: CompletionSource::Live,
                })
            }
        }
    }

    fn call_with_retry(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        let upstream = self
            .upstream
            .as_ref()
            .ok_or_else(|| GatewayError::Config("no upstream configured".into()))?;
        let attempts = self.config.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if let Some(gate) = &self.rate {
                gate.wait();
            }
            match upstream.call(&self.config.model_name, req) {
                Ok(t) => return Ok(t),
                Err(UpstreamError::Fatal(msg)) => return Err(GatewayError::UpstreamFailure(msg)),
                Err(e) => {
                    warn!(attempt, error = %e, "upstream call failed");
                    if attempt + 1 < attempts {
                        let mut wait = backoff_ms(self.config.retry_base_ms, attempt);
                        if let UpstreamError::RateLimited { retry_after_ms: Some(ra) } = e {
                            wait = wait.max(ra);
                        }
                        debug!(wait_ms = wait, "backing off");
                        if wait > 0 {
                            std::thread::sleep(Duration::from_millis(wait));
                        }
                    }
                    last = Some(e);
                }
            }
        }
        Err(match last {
            Some(UpstreamError::RateLimited { .. }) => GatewayError::RateLimited,
            Some(e) => GatewayError::UpstreamFailure(e.to_string()),
            None => GatewayError::UpstreamFailure("no attempts made".into()),
        })
    }

    /// Persist recorded entries. A no-op outside record mode or when nothing changed.
    pub fn flush(&self) -> Result<(), GatewayError> {
        if self.config.mode != BackendMode::Record {
            return Ok(());
        }
        let mut dirty = self.dirty.lock().expect("dirty lock");
        if !*dirty {
            return Ok(());
        }
        if let Some(p) = &self.config.cassette_path {
            self.cassette.read().expect("cassette lock").save(p)?;
        }
        *dirty = false;
        Ok(())
    }

    /// Snapshot of the current cassette contents.
    pub fn cassette(&self) -> Cassette {
        self.cassette.read().expect("cassette lock").clone()
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            warn!(error = %e, "failed to persist cassette on drop");
        }
    }
}

/// Exponential backoff with uniform jitter below one base interval.
pub fn backoff_ms(base_ms: u64, attempt: u32) -> u64 {
    if base_ms == 0 {
        return 0;
    }
    let exp = base_ms.saturating_mul(1u64 << attempt.min(16));
    exp + rand::thread_rng().gen_range(0..base_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn cfg(mode: BackendMode, path: Option<PathBuf>) -> GatewayConfig {
        GatewayConfig {
            mode,
            cassette_path: path,
            retry_base_ms: 0,
            model_name: "m".into(),
            ..Default::default()
        }
    }

    fn req(t: &str) -> PromptRequest {
        PromptRequest::user(t, 10, vec![])
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        {
            let up = FnUpstream(|r: &PromptRequest| Ok(format!("echo {}", r.user_text)));
            let g = Gateway::with_upstream(cfg(BackendMode::Record, Some(p.clone())), Box::new(up)).unwrap();
            assert_eq!(g.complete(&req("a")).unwrap().text, "echo a");
            g.flush().unwrap();
        }
        let g = Gateway::new(cfg(BackendMode::Replay, Some(p))).unwrap();
        let c = g.complete(&req("a")).unwrap();
        assert_eq!(c.text, "echo a");
        assert_eq!(c.source, CompletionSource::Cassette);
        assert!(matches!(g.complete(&req("b")), Err(GatewayError::CassetteMiss { .. })));
    }

    #[test]
    fn overflow_is_checked_before_io() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c2 = calls.clone();
        let up = FnUpstream(move |_: &PromptRequest| {
            c2.fetch_add(1, Ordering::SeqCst);
            Ok(String::new())
        });
        let mut c = cfg(BackendMode::Live, None);
        c.context_limit_tokens = 12;
        let g = Gateway::with_upstream(c, Box::new(up)).unwrap();
        // 8 bytes -> 2 tokens, + 10 max tokens = 12: fits.
        assert!(g.complete(&req("abcdefgh")).is_ok());
        // 9 bytes -> 3 tokens: overflows.
        let e = g.complete(&req("abcdefghi")).unwrap_err();
        assert_eq!(e, GatewayError::ContextOverflow { estimated: 13, limit: 12 });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c2 = calls.clone();
        let up = FnUpstream(move |_: &PromptRequest| {
            if c2.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(UpstreamError::Transient("boom".into()))
            } else {
                Ok("ok".into())
            }
        });
        let g = Gateway::with_upstream(cfg(BackendMode::Live, None), Box::new(up)).unwrap();
        assert_eq!(g.complete(&req("x")).unwrap().text, "ok");
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c2 = calls.clone();
        let up = FnUpstream(move |_: &PromptRequest| {
            c2.fetch_add(1, Ordering::SeqCst);
            Err(UpstreamError::RateLimited { retry_after_ms: None })
        });
        let g = Gateway::with_upstream(cfg(BackendMode::Live, None), Box::new(up)).unwrap();
        assert_eq!(g.complete(&req("x")).unwrap_err(), GatewayError::RateLimited);
        assert_eq!(calls.load(Ordering::SeqCst), 5);
    }

    #[test]
    fn fatal_is_not_retried() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c2 = calls.clone();
        let up = FnUpstream(move |_: &PromptRequest| {
            c2.fetch_add(1, Ordering::SeqCst);
            Err(UpstreamError::Fatal("400".into()))
        });
        let g = Gateway::with_upstream(cfg(BackendMode::Live, None), Box::new(up)).unwrap();
        assert!(matches!(g.complete(&req("x")), Err(GatewayError::UpstreamFailure(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn replay_ignores_upstream() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let mut c = Cassette::new("m");
        c.entries.insert(request_digest("m", &req("q")), "stored".into());
        c.save(&p).unwrap();
        let up = FnUpstream(|_: &PromptRequest| -> Result<String, UpstreamError> {
            panic!("replay must not call upstream")
        });
        let g = Gateway::with_upstream(cfg(BackendMode::Replay, Some(p)), Box::new(up)).unwrap();
        assert_eq!(g.complete(&req("q")).unwrap().text, "stored");
    }

    #[test]
    fn backoff_grows() {
        assert_eq!(backoff_ms(0, 3), 0);
        let b = backoff_ms(500, 2);
        assert!((2000..2500).contains(&b));
    }
}
