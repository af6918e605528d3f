//! LLM backend access behind one completion interface.
//!
//! This crate turns a prompt plan into transcript records three ways:
//!
//! - **Live** (`http_chat`): OpenAI-compatible chat-completions over HTTP,
//!   with bearer-token auth from the environment, bounded exponential-backoff
//!   retries on 429/5xx, a shared outbound rate limit, and a configurable
//!   request timeout ([`http`], [`retry`]).
//! - **Cached**: every live response is appended to an append-only JSONL
//!   [`store::TranscriptStore`] before it is returned, and prompts whose
//!   [`key::request_key`] is already recorded are served from that store with
//!   zero outgoing traffic — interrupted runs resume for free ([`runner`]).
//! - **Replay**: a `replay` backend serves entirely from a recorded fixture
//!   store, byte-deterministically, which is what makes end-to-end runs
//!   testable without network access.
//!
//! The [`runner::Gateway`] executes plans with bounded parallelism and
//! returns records in plan order regardless of completion order.

pub mod backend;
pub mod http;
pub mod key;
pub mod retry;
pub mod runner;
pub mod store;

pub use backend::{BackendDescriptor, BackendKind, GatewayError};
pub use key::request_key;
pub use retry::RetryConfig;
pub use runner::{Gateway, GatewayConfig, PlanFailure, RunReport};
pub use store::{TranscriptRecord, TranscriptStore};
