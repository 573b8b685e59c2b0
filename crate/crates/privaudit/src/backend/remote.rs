//! Remote chat-completion client. JSON-over-HTTP with the usual shape:
//! request `{model, messages, temperature, max_tokens}`, response
//! `{choices: [{message: {content}}]}`.
//!
//! Calls are synchronous; an in-flight gate caps concurrency across threads
//! and every request carries a correlation id header so responses are tied
//! to requests by id, never by arrival order. Transport failures and 5xx
//! answers are retried up to `max_retries` times — requests are idempotent
//! reads, so a retry never duplicates a side effect.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::prompts::{self, Message};
use super::{BackendError, BackendRequest, BackendResponse, Task, TextBackend};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is never serialized or written into reports.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    /// Retries after the first attempt, for transport failures and 5xx.
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Per-task `max_tokens` overrides, keyed by task name
    /// (`headings`, `classify`, `decode`, `map_items`, `map_purposes`,
    /// `verify_item`, `verify_purpose`).
    pub task_budgets: BTreeMap<String, u32>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8080/v1/chat/completions".to_string(),
            model: "default".to_string(),
            api_key_env: None,
            timeout_secs: 30,
            max_retries: 2,
            max_in_flight: 4,
            task_budgets: BTreeMap::new(),
        }
    }
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Headings => "headings",
        Task::Classify => "classify",
        Task::Decode => "decode",
        Task::MapItems => "map_items",
        Task::MapPurposes => "map_purposes",
        Task::VerifyItem => "verify_item",
        Task::VerifyPurpose => "verify_purpose",
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

/// Counting gate limiting concurrent requests.
struct InFlightGate {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl InFlightGate {
    fn new(max: usize) -> Self {
        InFlightGate {
            permits: Mutex::new(max.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut permits = self.permits.lock().expect("gate poisoned");
        while *permits == 0 {
            permits = self.freed.wait(permits).expect("gate poisoned");
        }
        *permits -= 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a InFlightGate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut permits = self.gate.permits.lock().expect("gate poisoned");
        *permits += 1;
        self.gate.freed.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: InFlightGate,
    next_correlation: AtomicU64,
    id: String,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let id = format!("remote:{}", config.model);
        Ok(RemoteBackend {
            gate: InFlightGate::new(config.max_in_flight),
            config,
            client,
            api_key,
            next_correlation: AtomicU64::new(1),
            id,
        })
    }

    fn attempt(
        &self,
        messages: &[Message],
        temperature: f32,
        max_tokens: u32,
        correlation_id: u64,
    ) -> Result<String, (BackendError, bool)> {
        let body = WireRequest {
            model: &self.config.model,
            messages,
            temperature,
            max_tokens,
        };
        let mut request = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .header("x-correlation-id", correlation_id.to_string())
            .body(serde_json::to_string(&body).expect("wire request serialization"));
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                (BackendError::Timeout, true)
            } else {
                (BackendError::Transport(e.to_string()), true)
            }
        })?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| (BackendError::Transport(e.to_string()), true))?;
        if status.is_server_error() {
            return Err((
                BackendError::Http {
                    status: status.as_u16(),
                    body: truncate(&text, 200),
                },
                true,
            ));
        }
        if !status.is_success() {
            return Err((
                BackendError::Http {
                    status: status.as_u16(),
                    body: truncate(&text, 200),
                },
                false,
            ));
        }
        let wire: WireResponse = serde_json::from_str(&text).map_err(|e| {
            (
                BackendError::Parse(format!("malformed completion body: {e}")),
                false,
            )
        })?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| {
                (
                    BackendError::Parse("completion body has no choices".to_string()),
                    false,
                )
            })?;
        Ok(content)
    }
}

fn truncate(text: &str, max: usize) -> String {
    if text.len() <= max {
        text.to_string()
    } else {
        let mut end = max;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}

impl TextBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn run(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let _permit = self.gate.acquire();
        let started = Instant::now();
        let task = request.payload.task();
        let messages = prompts::messages_for(&request.payload);
        let temperature = if request.budget.deterministic { 0.0 } else { 0.7 };
        let max_tokens = self
            .config
            .task_budgets
            .get(task_name(task))
            .copied()
            .unwrap_or(request.budget.max_output_tokens);
        let correlation_id = self.next_correlation.fetch_add(1, Ordering::Relaxed);

        let mut last_error = BackendError::Transport("no attempt made".to_string());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 * attempt as u64));
            }
            match self.attempt(&messages, temperature, max_tokens, correlation_id) {
                Ok(content) => {
                    return Ok(BackendResponse::from_raw(
                        task,
                        content,
                        started.elapsed(),
                        self.id(),
                    ));
                }
                Err((error, retryable)) => {
                    if !retryable {
                        return Err(error);
                    }
                    last_error = error;
                }
            }
        }
        Err(BackendError::RetriesExhausted(last_error.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    /// Minimal canned-response HTTP server: answers each connection with the
    /// next scripted (status, body) pair, recording request bodies.
    fn spawn_server(
        responses: Vec<(u16, String)>,
    ) -> (String, Arc<AtomicUsize>, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let hits_inner = Arc::clone(&hits);
        let bodies_inner = Arc::clone(&bodies);
        std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream);
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).is_err() || line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(value) = line.to_lowercase().strip_prefix("content-length:") {
                        content_length = value.trim().parse().unwrap_or(0);
                    }
                }
                let mut request_body = vec![0u8; content_length];
                let _ = reader.read_exact(&mut request_body);
                bodies_inner
                    .lock()
                    .unwrap()
                    .push(String::from_utf8_lossy(&request_body).to_string());
                hits_inner.fetch_add(1, Ordering::SeqCst);
                let mut stream = reader.into_inner();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-length: {}\r\ncontent-type: application/json\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        (format!("http://{addr}/v1/chat/completions"), hits, bodies)
    }

    fn completion_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    fn config_for(endpoint: String) -> RemoteConfig {
        RemoteConfig {
            endpoint,
            model: "test-model".to_string(),
            max_retries: 2,
            timeout_secs: 5,
            ..RemoteConfig::default()
        }
    }

    #[test]
    fn roundtrips_wire_schema_and_sends_one_request() {
        let (endpoint, hits, bodies) =
            spawn_server(vec![(200, completion_body(r#"["location"]"#))]);
        let backend = RemoteBackend::new(config_for(endpoint)).unwrap();
        let request = BackendRequest::new(super::super::TaskPayload::MapItems {
            items: vec!["GPS coordinates".to_string()],
        });
        let response = backend.run(&request).unwrap();
        assert_eq!(
            response.parsed,
            Some(super::super::TaskOutput::Keywords(vec!["location".into()]))
        );
        assert_eq!(hits.load(Ordering::SeqCst), 1);

        let sent = bodies.lock().unwrap();
        let body: serde_json::Value = serde_json::from_str(&sent[0]).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 0.0);
        assert!(body["max_tokens"].as_u64().unwrap() > 0);
        assert!(body["messages"].as_array().unwrap().len() == 2);
        assert_eq!(body["messages"][0]["role"], "user");
    }

    #[test]
    fn retries_on_server_error_then_succeeds() {
        let (endpoint, hits, _) = spawn_server(vec![
            (500, "{}".to_string()),
            (200, completion_body("Matching category = 'Do Not Track'\nReasoning = ''")),
        ]);
        let backend = RemoteBackend::new(config_for(endpoint)).unwrap();
        let request = BackendRequest::new(super::super::TaskPayload::Classify {
            text: "Do not track signals are honored.".to_string(),
        });
        let response = backend.run(&request).unwrap();
        assert!(response.parsed.is_some());
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn client_error_is_not_retried() {
        let (endpoint, hits, _) = spawn_server(vec![(401, "{}".to_string()), (200, "{}".into())]);
        let backend = RemoteBackend::new(config_for(endpoint)).unwrap();
        let request = BackendRequest::new(super::super::TaskPayload::VerifyItem {
            item: "x".to_string(),
        });
        let error = backend.run(&request).unwrap_err();
        assert!(matches!(error, BackendError::Http { status: 401, .. }));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn unreachable_endpoint_exhausts_retries() {
        // Port 9 (discard) on localhost is refused in this environment.
        let mut config = config_for("http://127.0.0.1:9/v1/chat/completions".to_string());
        config.max_retries = 1;
        let backend = RemoteBackend::new(config).unwrap();
        let request = BackendRequest::new(super::super::TaskPayload::VerifyItem {
            item: "x".to_string(),
        });
        assert!(matches!(
            backend.run(&request),
            Err(BackendError::RetriesExhausted(_))
        ));
    }

    #[test]
    fn missing_api_key_env_fails_at_construction() {
        let mut config = RemoteConfig::default();
        config.api_key_env = Some("PRIVAUDIT_TEST_KEY_THAT_DOES_NOT_EXIST".to_string());
        assert!(matches!(
            RemoteBackend::new(config),
            Err(BackendError::MissingApiKey(_))
        ));
    }
}
