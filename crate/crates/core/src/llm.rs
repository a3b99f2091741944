//! Chat-completion transport with retries, plus an offline mock.
//!
//! Requests are POSTed as `{"model", "messages", ...}` and the reply text is
//! read from `choices[0].message.content`. Timeouts, connection failures and
//! 5xx statuses are retried with exponential backoff.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "CORE_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "CORE_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("http status {0}")]
    HttpStatus(u16),
    #[error("unexpected response shape: {0}")]
    BadResponseShape(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
    #[error("invalid llm configuration: {0}")]
    Config(String),
}

impl LlmError {
    fn retryable(&self) -> bool {
        match self {
            LlmError::Timeout | LlmError::Connect(_) => true,
            LlmError::HttpStatus(code) => (500..600).contains(code),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// Single-turn user prompt.
    pub fn user(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            messages: vec![ChatMessage { role: Role::User, content: prompt.into() }],
            temperature: None,
            top_p: None,
            top_k: None,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub attempts: u32,
}

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
        }
    }

    /// Reads `CORE_LLM_ENDPOINT` and `CORE_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let mut cfg = EndpointConfig::new(url);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout.is_zero() {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.base_url.is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.backoff_base.saturating_mul(factor).min(Duration::from_secs(60))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Moves one JSON body to the endpoint.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, api_key: Option<&str>, body: &Value, timeout: Duration) -> Result<HttpReply, LlmError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder().build().map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, api_key: Option<&str>, body: &Value, timeout: Duration) -> Result<HttpReply, LlmError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Connect(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Connect(e.to_string()) })?;
        Ok(HttpReply { status, body })
    }
}

/// Scripted transport: replays queued outcomes and records every request body.
#[derive(Default)]
pub struct MockTransport {
    queue: Mutex<VecDeque<Result<HttpReply, LlmError>>>,
    requests: Mutex<Vec<Value>>,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, outcome: Result<HttpReply, LlmError>) -> &Self {
        self.queue.lock().unwrap().push_back(outcome);
        self
    }

    /// Queues a well-formed 200 reply carrying `text`.
    pub fn push_text(&self, text: &str) -> &Self {
        self.push(Ok(HttpReply { status: 200, body: completion_body(text).to_string() }))
    }

    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }
}

impl Transport for MockTransport {
    fn post(&self, _url: &str, _api_key: Option<&str>, body: &Value, _timeout: Duration) -> Result<HttpReply, LlmError> {
        self.requests.lock().unwrap().push(body.clone());
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(LlmError::Connect("mock transport has no scripted reply".into())))
    }
}

/// Body of a minimal chat-completions reply.
pub fn completion_body(text: &str) -> Value {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})
}

fn parse_reply(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::BadResponseShape(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::BadResponseShape("missing choices[0].message.content".into()))
}

/// One logical completion: at most `max_retries + 1` transport attempts.
pub fn complete(
    req: &ChatRequest,
    cfg: &EndpointConfig,
    transport: &dyn Transport,
    sleep: &dyn Fn(Duration),
) -> Result<ChatResponse, LlmError> {
    cfg.validate()?;
    if req.messages.is_empty() {
        return Err(LlmError::Config("request has no messages".into()));
    }
    let body = serde_json::to_value(req).map_err(|e| LlmError::Config(e.to_string()))?;
    let url = cfg.completions_url();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let outcome = transport.post(&url, cfg.api_key.as_deref(), &body, cfg.timeout).and_then(|reply| {
            if reply.status == 200 || (200..300).contains(&reply.status) {
                parse_reply(&reply.body)
            } else {
                Err(LlmError::HttpStatus(reply.status))
            }
        });
        match outcome {
            Ok(text) => return Ok(ChatResponse { text, attempts }),
            Err(e) if e.retryable() && attempts <= cfg.max_retries => {
                log::warn!("llm attempt {attempts} failed: {e}; retrying");
                sleep(cfg.backoff(attempts));
            }
            Err(e) if e.retryable() && attempts > 1 => {
                return Err(LlmError::RetriesExhausted { attempts, last: Box::new(e) })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Anything that can answer a chat request.
pub trait ChatModel: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.cv.notify_one();
    }
}

/// Endpoint + transport with a bound on concurrent in-flight requests.
pub struct LlmClient {
    cfg: EndpointConfig,
    transport: Arc<dyn Transport>,
    limiter: Limiter,
}

impl LlmClient {
    pub fn new(cfg: EndpointConfig, transport: Arc<dyn Transport>, max_in_flight: usize) -> Self {
        LlmClient {
            cfg,
            transport,
            limiter: Limiter { max: max_in_flight.max(1), in_flight: Mutex::new(0), cv: Condvar::new() },
        }
    }

    /// HTTP client configured from the environment.
    pub fn from_env(max_in_flight: usize) -> Result<Self, LlmError> {
        Ok(LlmClient::new(EndpointConfig::from_env()?, Arc::new(HttpTransport::new()?), max_in_flight))
    }
}

impl ChatModel for LlmClient {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let _slot = self.limiter.acquire();
        complete(req, &self.cfg, self.transport.as_ref(), &std::thread::sleep)
    }
}

/// Offline model answering from a function of the prompt text.
pub struct CannedChat<F>(pub F);

impl<F> ChatModel for CannedChat<F>
where
    F: Fn(&str) -> String + Send + Sync,
{
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let prompt = req.messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        Ok(ChatResponse { text: (self.0)(prompt), attempts: 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn cfg(max_retries: u32) -> EndpointConfig {
        let mut c = EndpointConfig::new("http://mock");
        c.max_retries = max_retries;
        c.backoff_base = Duration::from_millis(10);
        c
    }

    #[test]
    fn canned_reply_is_returned() {
        let t = MockTransport::new();
        t.push_text("hello");
        let r = complete(&ChatRequest::user("m", "hi"), &cfg(0), &t, &|_| {}).unwrap();
        assert_eq!(r, ChatResponse { text: "hello".into(), attempts: 1 });
        assert_eq!(t.requests()[0]["messages"][0]["content"], "hi");
    }

    #[test]
    fn retries_until_success() {
        let t = MockTransport::new();
        t.push(Err(LlmError::Timeout));
        t.push(Ok(HttpReply { status: 503, body: String::new() }));
        t.push_text("ok");
        let delays = RefCell::new(Vec::new());
        let r = complete(&ChatRequest::user("m", "x"), &cfg(3), &t, &|d| delays.borrow_mut().push(d)).unwrap();
        assert_eq!(r.attempts, 3);
        assert_eq!(t.requests().len(), 3);
        let d = delays.into_inner();
        assert_eq!(d, vec![Duration::from_millis(10), Duration::from_millis(20)]);
    }

    #[test]
    fn never_exceeds_retry_budget() {
        let t = MockTransport::new();
        for _ in 0..10 {
            t.push(Err(LlmError::Timeout));
        }
        let e = complete(&ChatRequest::user("m", "x"), &cfg(2), &t, &|_| {}).unwrap_err();
        assert_eq!(e, LlmError::RetriesExhausted { attempts: 3, last: Box::new(LlmError::Timeout) });
        assert_eq!(t.requests().len(), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = MockTransport::new();
        t.push(Ok(HttpReply { status: 401, body: String::new() }));
        let e = complete(&ChatRequest::user("m", "x"), &cfg(3), &t, &|_| {}).unwrap_err();
        assert_eq!(e, LlmError::HttpStatus(401));
    }

    #[test]
    fn malformed_body() {
        let t = MockTransport::new();
        t.push(Ok(HttpReply { status: 200, body: "{not json".into() }));
        let e = complete(&ChatRequest::user("m", "x"), &cfg(3), &t, &|_| {}).unwrap_err();
        assert!(matches!(e, LlmError::BadResponseShape(_)));
        t.push(Ok(HttpReply { status: 200, body: r#"{"choices":[]}"#.into() }));
        let e = complete(&ChatRequest::user("m", "x"), &cfg(3), &t, &|_| {}).unwrap_err();
        assert!(matches!(e, LlmError::BadResponseShape(_)));
    }

    #[test]
    fn backoff_is_non_decreasing() {
        let c = cfg(40);
        let mut prev = Duration::ZERO;
        for i in 1..40 {
            let d = c.backoff(i);
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn url_building() {
        assert_eq!(EndpointConfig::new("http://h/v1/").completions_url(), "http://h/v1/chat/completions");
        assert_eq!(EndpointConfig::new("http://h/v1/chat/completions").completions_url(), "http://h/v1/chat/completions");
    }
}
