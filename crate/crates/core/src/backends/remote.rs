//! HTTP clients for remote model services.
//!
//! Requests are JSON `POST`s (see [`super::wire`]). Transport failures,
//! timeouts, `429` and `5xx` responses are retried with exponential backoff;
//! other non-2xx statuses and bodies that break the schema are protocol
//! errors and are not retried. In-flight requests are bounded per host.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::RngCore;
use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::*;
use super::{BackendError, ChatBackend, NerBackend, NliBackend, QuestionBackend};
use crate::model::{Entity, GenerationConfig, Utterance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, for `attempt >= 1`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff * self.multiplier.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Debug)]
struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

/// Shared per-host concurrency limits. Endpoints built from the same
/// `HostLimits` with the same host share one permit pool.
#[derive(Debug, Clone)]
pub struct HostLimits {
    per_host: usize,
    pools: Arc<Mutex<HashMap<String, Arc<Semaphore>>>>,
}

impl Default for HostLimits {
    fn default() -> Self {
        Self::new(4)
    }
}

impl HostLimits {
    pub fn new(per_host: usize) -> Self {
        Self {
            per_host: per_host.max(1),
            pools: Arc::default(),
        }
    }

    fn pool_for(&self, host: &str) -> Arc<Semaphore> {
        let mut pools = self.pools.lock().unwrap_or_else(|e| e.into_inner());
        pools
            .entry(host.to_string())
            .or_insert_with(|| Arc::new(Semaphore::new(self.per_host)))
            .clone()
    }
}

/// Base URL plus the HTTP machinery shared by all capability clients.
#[derive(Debug, Clone)]
pub struct RemoteEndpoint {
    base_url: String,
    client: Client,
    retry: RetryPolicy,
    limiter: Arc<Semaphore>,
}

impl RemoteEndpoint {
    pub fn new(base_url: &str, limits: &HostLimits) -> Result<Self, BackendError> {
        Self::with_options(base_url, limits, RetryPolicy::default(), Duration::from_secs(60))
    }

    pub fn with_options(
        base_url: &str,
        limits: &HostLimits,
        retry: RetryPolicy,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let url = reqwest::Url::parse(base_url)
            .map_err(|e| BackendError::Argument(format!("bad endpoint `{base_url}`: {e}")))?;
        let host = format!(
            "{}:{}",
            url.host_str().unwrap_or_default(),
            url.port_or_known_default().unwrap_or_default()
        );
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Argument(format!("http client: {e}")))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            retry,
            limiter: limits.pool_for(&host),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn protocol(&self, path: &str, message: impl Into<String>) -> BackendError {
        BackendError::Protocol {
            endpoint: format!("{}{path}", self.base_url),
            message: message.into(),
        }
    }

    /// POSTs `body` to `path` and decodes the JSON response.
    pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, BackendError> {
        let url = format!("{}{path}", self.base_url);
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            if attempt > 1 {
                thread::sleep(self.retry.backoff(attempt - 1));
            }
            let outcome = {
                let _permit = self.limiter.acquire();
                self.client.post(&url).json(body).send().and_then(|r| {
                    let status = r.status();
                    r.text().map(|text| (status, text))
                })
            };
            match outcome {
                Ok((status, text)) if status.is_success() => {
                    return serde_json::from_str(&text).map_err(|e| self.protocol(path, format!("bad response body: {e}")));
                }
                Ok((status, text)) if status.is_server_error() || status.as_u16() == 429 => {
                    last_error = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
                }
                Ok((status, _)) => return Err(self.protocol(path, format!("HTTP {status}"))),
                Err(e) => last_error = e.to_string(),
            }
            tracing::warn!(%url, attempt, error = %last_error, "model service request failed");
        }
        Err(BackendError::Request {
            endpoint: url,
            attempts: self.retry.max_attempts.max(1),
            message: last_error,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteChat {
    name: String,
    endpoint: RemoteEndpoint,
}

impl RemoteChat {
    pub fn new(name: impl Into<String>, endpoint: RemoteEndpoint) -> Self {
        Self {
            name: name.into(),
            endpoint,
        }
    }
}

impl ChatBackend for RemoteChat {
    fn identity(&self) -> &str {
        &self.name
    }

    fn generate(
        &self,
        history: &[Utterance],
        cfg: &GenerationConfig,
        _rng: &mut dyn RngCore,
    ) -> Result<String, BackendError> {
        let req = GenerateRequest {
            history: history
                .iter()
                .map(|u| HistoryItem {
                    speaker: u.speaker,
                    text: u.text.clone(),
                })
                .collect(),
            nucleus_p: cfg.nucleus_p,
        };
        let resp: GenerateResponse = self.endpoint.post_json(GENERATE_PATH, &req)?;
        if resp.text.trim().is_empty() {
            return Err(self.endpoint.protocol(GENERATE_PATH, "empty text"));
        }
        Ok(resp.text)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteNer {
    endpoint: RemoteEndpoint,
}

impl RemoteNer {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        Self { endpoint }
    }
}

impl NerBackend for RemoteNer {
    fn identity(&self) -> &str {
        self.endpoint.base_url()
    }

    fn extract(&self, text: &str) -> Result<Vec<Entity>, BackendError> {
        let resp: NerResponse = self.endpoint.post_json(NER_PATH, &NerRequest { text: text.to_string() })?;
        if let Some(bad) = resp.entities.iter().find(|e| !e.is_anchored_in(text)) {
            return Err(self.endpoint.protocol(
                NER_PATH,
                format!("entity `{}` span {}..{} does not match the text", bad.surface, bad.start, bad.end),
            ));
        }
        Ok(resp.entities)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteQuestions {
    endpoint: RemoteEndpoint,
}

impl RemoteQuestions {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        Self { endpoint }
    }
}

impl QuestionBackend for RemoteQuestions {
    fn identity(&self) -> &str {
        self.endpoint.base_url()
    }

    fn question(&self, context: &str, entity: &Entity) -> Result<String, BackendError> {
        let req = QgRequest {
            context: context.to_string(),
            answer: entity.surface.clone(),
        };
        let resp: QgResponse = self.endpoint.post_json(QG_PATH, &req)?;
        if resp.question.trim().is_empty() {
            return Err(self.endpoint.protocol(QG_PATH, "empty question"));
        }
        Ok(resp.question)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteNli {
    identity: String,
    endpoint: RemoteEndpoint,
}

impl RemoteNli {
    /// `identity` records the evaluator model, e.g. `"roberta-large-mnli"`.
    pub fn new(identity: impl Into<String>, endpoint: RemoteEndpoint) -> Self {
        Self {
            identity: identity.into(),
            endpoint,
        }
    }

    /// Full three-way distribution as returned by the service.
    pub fn distribution(&self, premise: &str, hypothesis: &str) -> Result<NliResponse, BackendError> {
        let req = NliRequest {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        let resp: NliResponse = self.endpoint.post_json(NLI_PATH, &req)?;
        if !(0.0..=1.0).contains(&resp.contradiction) {
            return Err(self.endpoint.protocol(NLI_PATH, format!("contradiction {} outside [0, 1]", resp.contradiction)));
        }
        Ok(resp)
    }
}

impl NliBackend for RemoteNli {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn contradiction(&self, premise: &str, hypothesis: &str) -> Result<f64, BackendError> {
        let resp = self.distribution(premise, hypothesis)?;
        tracing::debug!(
            contradiction = resp.contradiction,
            neutral = ?resp.neutral,
            entailment = ?resp.entailment,
            "nli"
        );
        Ok(resp.contradiction)
    }
}
