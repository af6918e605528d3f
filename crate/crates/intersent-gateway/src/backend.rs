//! Backend descriptors and the gateway error taxonomy.

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How a backend produces completions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Live OpenAI-compatible chat-completions endpoint.
    HttpChat,
    /// Deterministic lookup in a previously recorded transcript store.
    Replay,
}

/// A named completion backend.
///
/// `backend_id` is the stable name used in transcript paths and request keys,
/// and doubles as the wire `model` name unless `generation_params` carries an
/// explicit `"model"` override. An empty `generation_params` map means the
/// provider's defaults are used untouched (no temperature or max-token
/// override).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    /// Chat-completions URL. Required for `http_chat`; ignored for `replay`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    /// Required for `http_chat`; ignored for `replay`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_source: Option<String>,
    /// Extra request-body fields passed through verbatim.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub generation_params: serde_json::Map<String, serde_json::Value>,
}

impl BackendDescriptor {
    /// Check the descriptor invariants: a non-empty, filesystem-safe
    /// `backend_id`, and the fields the chosen kind requires.
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.backend_id.is_empty() {
            return Err(GatewayError::Config {
                message: "backend_id must be non-empty".into(),
            });
        }
        let safe = self
            .backend_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
        if !safe {
            return Err(GatewayError::Config {
                message: format!(
                    "backend_id `{}` is not filesystem-safe (allowed: ASCII letters, \
                     digits, `.`, `_`, `-`)",
                    self.backend_id
                ),
            });
        }
        if self.backend_id.chars().all(|c| c == '.') {
            return Err(GatewayError::Config {
                message: format!(
                    "backend_id `{}` is a reserved path component",
                    self.backend_id
                ),
            });
        }
        if self.kind == BackendKind::HttpChat {
            if self.endpoint.as_deref().map_or(true, str::is_empty) {
                return Err(GatewayError::Config {
                    message: format!(
                        "http_chat backend `{}` requires an endpoint URL",
                        self.backend_id
                    ),
                });
            }
            if self.auth_source.as_deref().map_or(true, str::is_empty) {
                return Err(GatewayError::Config {
                    message: format!(
                        "http_chat backend `{}` requires auth_source (the name of the \
                         environment variable holding the bearer token)",
                        self.backend_id
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Everything that can go wrong between a prompt and its transcript record.
#[derive(Debug, Error)]
pub enum GatewayError {
    /// Credential missing from the environment, or rejected by the endpoint.
    #[error("backend `{backend_id}`: {message}")]
    Auth { backend_id: String, message: String },

    /// Network failure, malformed response, or HTTP >= 500 after the retry
    /// budget; also non-retryable HTTP statuses other than auth failures.
    #[error("backend `{backend_id}`: {message}")]
    Transport { backend_id: String, message: String },

    /// The endpoint was still returning 429 when the bounded exponential
    /// backoff budget ran out.
    #[error("backend `{backend_id}`: still rate-limited after {attempts} attempts of exponential backoff")]
    RateLimit { backend_id: String, attempts: u32 },

    /// The replay store holds no record for the request.
    #[error("replay store has no record for request_key `{request_key}`")]
    ReplayMiss { request_key: String },

    /// Transcript store I/O or parse failure.
    #[error("transcript store `{}`: {source}", path.display())]
    Store {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Invalid descriptor or gateway configuration.
    #[error("invalid gateway configuration: {message}")]
    Config { message: String },

    /// More prompts failed than the run's failure fraction allows.
    #[error(
        "run aborted: {failed} of {total} prompts failed (allowed fraction {allowed}); \
         first failure: {first}"
    )]
    PlanAborted {
        failed: usize,
        total: usize,
        allowed: f64,
        first: Box<GatewayError>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn http_descriptor(id: &str) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: id.to_string(),
            kind: BackendKind::HttpChat,
            endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()),
            auth_source: Some("TEST_KEY".into()),
            generation_params: serde_json::Map::new(),
        }
    }

    #[test]
    fn accepts_typical_model_names() {
        for id in ["gpt-4-preview-1106", "stub", "llama_3.1-70b", "a"] {
            http_descriptor(id).validate().unwrap_or_else(|e| {
                panic!("id {id:?} should validate, got: {e}");
            });
        }
    }

    #[test]
    fn rejects_unsafe_backend_ids() {
        for id in ["", "a/b", "..", ".", "a b", "a\nb", "ä"] {
            let err = http_descriptor(id).validate().unwrap_err();
            assert!(
                matches!(err, GatewayError::Config { .. }),
                "id {id:?} should be rejected as Config error"
            );
        }
    }

    #[test]
    fn http_chat_requires_endpoint_and_auth_source() {
        let mut d = http_descriptor("m");
        d.endpoint = None;
        assert!(d.validate().is_err());

        let mut d = http_descriptor("m");
        d.auth_source = Some(String::new());
        assert!(d.validate().is_err());
    }

    #[test]
    fn replay_needs_neither_endpoint_nor_auth() {
        let d = BackendDescriptor {
            backend_id: "fixture-backend".into(),
            kind: BackendKind::Replay,
            endpoint: None,
            auth_source: None,
            generation_params: serde_json::Map::new(),
        };
        d.validate().expect("replay descriptor should validate");
    }

    #[test]
    fn kind_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&BackendKind::HttpChat).unwrap(),
            "\"http_chat\""
        );
        assert_eq!(
            serde_json::to_string(&BackendKind::Replay).unwrap(),
            "\"replay\""
        );
    }

    #[test]
    fn descriptor_round_trips_through_json() {
        let mut params = serde_json::Map::new();
        params.insert("max_tokens".into(), serde_json::json!(512));
        let d = BackendDescriptor {
            backend_id: "gpt-4-preview-1106".into(),
            kind: BackendKind::HttpChat,
            endpoint: Some("https://api.example.com/v1/chat/completions".into()),
            auth_source: Some("OPENAI_API_KEY".into()),
            generation_params: params,
        };
        let text = serde_json::to_string(&d).unwrap();
        let back: BackendDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
