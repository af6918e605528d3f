//! OpenAI-compatible chat-completions client (blocking, over `ureq`).
//!
//! One request is one stateless exchange: a JSON POST whose body carries the
//! model name, any passthrough generation parameters, and exactly two
//! messages — the system instruction and one user question. No conversation
//! state is carried between repeats. Authentication is a bearer token read
//! from the environment variable named by the backend's `auth_source`,
//! resolved at call time so credentials are never stored.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::backend::BackendDescriptor;

/// Outcome of a single HTTP attempt, classified for the retry loop.
#[derive(Debug)]
pub(crate) enum CallError {
    /// Missing credential, or the endpoint rejected it (401/403). Not retried.
    Auth(String),
    /// HTTP 429 or 5xx — worth retrying under the backoff budget.
    RetryableStatus(u16),
    /// Connection/timeout/DNS failure — also retried.
    Network(String),
    /// Anything that retrying cannot fix: other 4xx, malformed response body.
    Fatal(String),
}

pub(crate) struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    auth_source: String,
    /// Request body template: generation params plus the model name.
    body_base: Map<String, Value>,
}

impl HttpChatClient {
    /// Build a client from a validated `http_chat` descriptor.
    pub(crate) fn new(descriptor: &BackendDescriptor, timeout: Duration) -> HttpChatClient {
        let mut body_base = descriptor.generation_params.clone();
        body_base
            .entry("model".to_string())
            .or_insert_with(|| Value::String(descriptor.backend_id.clone()));
        HttpChatClient {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint: descriptor
                .endpoint
                .clone()
                .expect("validated http_chat descriptor has an endpoint"),
            auth_source: descriptor
                .auth_source
                .clone()
                .expect("validated http_chat descriptor has an auth_source"),
            body_base,
        }
    }

    /// Send one exchange and return the assistant message text verbatim.
    pub(crate) fn call(&self, system_text: &str, user_text: &str) -> Result<String, CallError> {
        let token = std::env::var(&self.auth_source)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| {
                CallError::Auth(format!(
                    "credential variable `{}` is not set",
                    self.auth_source
                ))
            })?;
        let mut body = self.body_base.clone();
        body.insert(
            "messages".to_string(),
            json!([
                { "role": "system", "content": system_text },
                { "role": "user", "content": user_text },
            ]),
        );
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {token}"))
            .send_json(Value::Object(body));
        match response {
            Ok(ok) => extract_content(ok),
            Err(ureq::Error::Status(code, failed)) => match code {
                401 | 403 => Err(CallError::Auth(format!(
                    "endpoint rejected the credential (HTTP {code})"
                ))),
                429 => Err(CallError::RetryableStatus(429)),
                code if code >= 500 => Err(CallError::RetryableStatus(code)),
                code => {
                    let detail = failed.into_string().unwrap_or_default();
                    let detail = detail.trim();
                    let detail: String = detail.chars().take(200).collect();
                    Err(CallError::Fatal(format!("HTTP {code}: {detail}")))
                }
            },
            Err(ureq::Error::Transport(transport)) => {
                Err(CallError::Network(transport.to_string()))
            }
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

fn extract_content(response: ureq::Response) -> Result<String, CallError> {
    let parsed: ChatResponse = response
        .into_json()
        .map_err(|e| CallError::Fatal(format!("malformed chat-completions response: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|choice| choice.message.content)
        .ok_or_else(|| CallError::Fatal("chat-completions response had no choices".to_string()))
}
