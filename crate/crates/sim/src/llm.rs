//! Chat-completion clients.
//!
//! Any endpoint that accepts `{"model", "messages": [{"role", "content"}],
//! "temperature"}` and answers with `{"choices": [{"message": {"content"}}]}`
//! works with [`HttpClient`].

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Stage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    /// The request did not produce a usable response. `status` is the HTTP
    /// status when one was received.
    #[error("LLM transport error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
}

impl LlmError {
    pub fn transport(message: impl Into<String>) -> Self {
        LlmError::Transport { status: None, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub stage: Stage,
    pub system: String,
    pub user: String,
    pub temperature: Option<f64>,
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    /// Identifier recorded in the manifest.
    fn model_id(&self) -> &str;
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking HTTP client for chat-completion endpoints.
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpClient { agent, endpoint: endpoint.into(), model: model.into(), api_key }
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = Body {
            model: &self.model,
            messages: [
                Message { role: "system", content: &request.system },
                Message { role: "user", content: &request.user },
            ],
            temperature: request.temperature,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| LlmError::transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Transport { status: Some(status), message: text.chars().take(500).collect() });
        }
        let completion: Completion = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Transport { status: Some(status), message: e.to_string() })?;
        completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Transport { status: Some(status), message: "response has no choices".into() })
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

type Responder = dyn Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync;

/// Test client driven by a closure.
///
/// The closure receives the request and how many times this exact
/// `(stage, user message)` has been asked before, so replies stay
/// deterministic when jobs run concurrently.
pub struct ScriptedClient {
    model: String,
    responder: Box<Responder>,
    calls: AtomicUsize,
    seen: Mutex<HashMap<(Stage, String), usize>>,
}

impl ScriptedClient {
    pub fn new<F>(responder: F) -> Self
    where
        F: Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        ScriptedClient {
            model: "mock".to_string(),
            responder: Box::new(responder),
            calls: AtomicUsize::new(0),
            seen: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Total requests served.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Built-in offline client: echoes the seed table as the new label and
    /// answers every plotting request with a dependency-free Python script
    /// that writes a small PNG.
    pub fn offline() -> Self {
        ScriptedClient::new(|req, _| match req.stage {
            Stage::Data => Ok(extract_data_slot(&req.user).unwrap_or_default().to_string()),
            Stage::Image => Ok(OFFLINE_PLOT_SCRIPT.to_string()),
        })
        .with_model("offline-mock")
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let nth = {
            let mut seen = self.seen.lock().expect("mock state poisoned");
            let n = seen.entry((request.stage, request.user.clone())).or_insert(0);
            *n += 1;
            *n - 1
        };
        (self.responder)(request, nth)
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

/// The text between the data slot delimiters of a user message.
pub fn extract_data_slot(user: &str) -> Option<&str> {
    let start = user.find(crate::prompt::DATA_OPEN)? + crate::prompt::DATA_OPEN.len();
    let end = user.rfind(crate::prompt::DATA_CLOSE)?;
    (start <= end).then(|| user[start..end].trim())
}

/// Writes a 1x1 PNG with the standard library only.
pub const OFFLINE_PLOT_SCRIPT: &str = r#"import struct, zlib

def chunk(kind, data):
    body = kind + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

png = b"\x89PNG\r\n\x1a\n"
png += chunk(b"IHDR", struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0))
png += chunk(b"IDAT", zlib.compress(b"\x00\xff\x80\x00"))
png += chunk(b"IEND", b"")
with open("chart.png", "wb") as f:
    f.write(png)
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_slot() {
        assert_eq!(extract_data_slot("The data is <data> none,A\nx,1 </data>"), Some("none,A\nx,1"));
        assert_eq!(extract_data_slot("no slot"), None);
    }

    #[test]
    fn scripted_counts_per_prompt() {
        let client = ScriptedClient::new(|_, n| Ok(n.to_string()));
        let req = |user: &str| ChatRequest {
            stage: Stage::Image,
            system: String::new(),
            user: user.into(),
            temperature: None,
        };
        assert_eq!(client.complete(&req("a")).unwrap(), "0");
        assert_eq!(client.complete(&req("b")).unwrap(), "0");
        assert_eq!(client.complete(&req("a")).unwrap(), "1");
        assert_eq!(client.calls(), 3);
    }

    #[test]
    fn transport_error_message() {
        let e = LlmError::Transport { status: Some(503), message: "busy".into() };
        assert_eq!(e.to_string(), "LLM transport error (status 503): busy");
        assert_eq!(LlmError::transport("refused").to_string(), "LLM transport error: refused");
    }
}
