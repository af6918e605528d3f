//! The gateway: one completion interface over live HTTP and replay backends,
//! with caching, retries, rate limiting, and plan execution.
//!
//! A [`Gateway`] is built for one (backend, run) pair around one transcript
//! store. For a live `http_chat` backend the store is both cache and output:
//! [`Gateway::complete`] serves a recorded response when the request key is
//! already present, and appends every fresh response before returning — so a
//! re-run of the same plan is free, and an interrupted run resumes where it
//! stopped. For a `replay` backend the store is a read-only fixture: every
//! completion must already be recorded, and an absent key is a
//! [`GatewayError::ReplayMiss`] naming the key.
//!
//! [`Gateway::run_plan`] executes a whole prompt plan with up to
//! `parallelism` in-flight requests. Output order is plan order regardless of
//! completion order, and the shared rate limiter keeps the outgoing request
//! rate bounded no matter how many workers run.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;

use intersent_core::groups::Prompt;

use crate::backend::{BackendDescriptor, BackendKind, GatewayError};
use crate::http::{CallError, HttpChatClient};
use crate::key::request_key;
use crate::retry::{RateLimiter, RetryConfig};
use crate::store::{TranscriptRecord, TranscriptStore};

/// Tunables for live traffic. The defaults are deliberately conservative:
/// 5 attempts of exponential backoff, 2 outgoing requests per second, a 60 s
/// request timeout, and zero tolerated failures per plan.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub retry: RetryConfig,
    /// Outgoing requests per second, shared across all workers of this
    /// backend. Cache and replay hits are not counted.
    pub rate_limit_rps: f64,
    /// Per-request timeout for live HTTP calls.
    pub timeout: Duration,
    /// A plan aborts once `failed / total` exceeds this fraction (default 0:
    /// any failure aborts). Tolerated failures are dropped from the output
    /// and listed in [`RunReport::failures`].
    pub failure_fraction: f64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            retry: RetryConfig::default(),
            rate_limit_rps: 2.0,
            timeout: Duration::from_secs(60),
            failure_fraction: 0.0,
        }
    }
}

/// Where a completed record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    /// Fresh live response (one outgoing HTTP request).
    Network,
    /// Served from the live store without any outgoing request.
    Cache,
    /// Served from a replay fixture store.
    Fixture,
}

/// One prompt that failed within a tolerated failure budget.
#[derive(Debug)]
pub struct PlanFailure {
    /// Index into the plan passed to [`Gateway::run_plan`].
    pub plan_index: usize,
    pub request_key: String,
    pub error: GatewayError,
}

/// Result of [`Gateway::run_plan`]: plan-ordered records plus traffic
/// accounting (how many prompts cost an outgoing request, how many were
/// free).
#[derive(Debug, Default)]
pub struct RunReport {
    /// One record per completed prompt, in plan order.
    pub records: Vec<TranscriptRecord>,
    /// Prompts that failed but stayed within the failure budget; empty under
    /// the default zero tolerance.
    pub failures: Vec<PlanFailure>,
    pub outgoing_requests: usize,
    pub served_from_cache: usize,
    pub served_from_replay: usize,
}

impl RunReport {
    pub fn into_records(self) -> Vec<TranscriptRecord> {
        self.records
    }
}

enum Engine {
    Http(HttpChatClient),
    Replay,
}

/// One backend bound to one run and one transcript store.
pub struct Gateway {
    descriptor: BackendDescriptor,
    run_id: String,
    store: Arc<TranscriptStore>,
    engine: Engine,
    limiter: RateLimiter,
    retry: RetryConfig,
    failure_fraction: f64,
}

impl Gateway {
    /// Bind `descriptor` to `store` for run `run_id`.
    ///
    /// For `http_chat` the store is the live cache-and-output file; for
    /// `replay` it is the fixture store to serve from.
    pub fn new(
        descriptor: BackendDescriptor,
        run_id: impl Into<String>,
        store: Arc<TranscriptStore>,
        config: GatewayConfig,
    ) -> Result<Gateway, GatewayError> {
        descriptor.validate()?;
        if !(0.0..=1.0).contains(&config.failure_fraction) {
            return Err(GatewayError::Config {
                message: format!(
                    "failure_fraction must be within [0, 1], got {}",
                    config.failure_fraction
                ),
            });
        }
        if !(config.rate_limit_rps.is_finite() && config.rate_limit_rps > 0.0) {
            return Err(GatewayError::Config {
                message: format!(
                    "rate_limit_rps must be positive and finite, got {}",
                    config.rate_limit_rps
                ),
            });
        }
        if config.retry.max_attempts == 0 {
            return Err(GatewayError::Config {
                message: "retry.max_attempts must be at least 1".into(),
            });
        }
        let engine = match descriptor.kind {
            BackendKind::HttpChat => {
                Engine::Http(HttpChatClient::new(&descriptor, config.timeout))
            }
            BackendKind::Replay => Engine::Replay,
        };
        Ok(Gateway {
            descriptor,
            run_id: run_id.into(),
            store,
            engine,
            limiter: RateLimiter::new(config.rate_limit_rps),
            retry: config.retry,
            failure_fraction: config.failure_fraction,
        })
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn store(&self) -> &Arc<TranscriptStore> {
        &self.store
    }

    /// The request key this gateway computes for `prompt`.
    pub fn key_for(&self, prompt: &Prompt) -> String {
        request_key(
            &self.descriptor.backend_id,
            &prompt.system_text,
            &prompt.user_text,
            prompt.repeat_index,
        )
    }

    /// Complete one prompt: from cache when recorded, live otherwise. Live
    /// responses are appended to the store before this returns.
    pub fn complete(&self, prompt: &Prompt) -> Result<TranscriptRecord, GatewayError> {
        self.complete_inner(prompt).map(|(record, _)| record)
    }

    fn complete_inner(&self, prompt: &Prompt) -> Result<(TranscriptRecord, Origin), GatewayError> {
        let key = self.key_for(prompt);
        match &self.engine {
            Engine::Replay => {
                let fixture =
                    self.store
                        .lookup(&key)
                        .ok_or_else(|| GatewayError::ReplayMiss {
                            request_key: key.clone(),
                        })?;
                // Rebuild the record from the *current* prompt: the key binds
                // only (backend_id, system_text, user_text, repeat_index), so
                // the plan — not possibly stale fixture metadata — is the
                // authority on attribute/codes/template. Response bytes and
                // timestamp are preserved verbatim, which keeps replay runs
                // byte-deterministic.
                let record = TranscriptRecord {
                    run_id: self.run_id.clone(),
                    backend_id: self.descriptor.backend_id.clone(),
                    attribute: prompt.attribute,
                    from_code: prompt.from_code.clone(),
                    to_code: prompt.to_code.clone(),
                    template_id: prompt.template_id.clone(),
                    repeat_index: prompt.repeat_index,
                    system_text: prompt.system_text.clone(),
                    user_text: prompt.user_text.clone(),
                    response_text: fixture.response_text,
                    request_key: key,
                    timestamp: fixture.timestamp,
                };
                Ok((record, Origin::Fixture))
            }
            Engine::Http(client) => {
                if let Some(cached) = self.store.lookup(&key) {
                    return Ok((cached, Origin::Cache));
                }
                let response_text =
                    self.call_with_retry(client, &prompt.system_text, &prompt.user_text)?;
                let record = TranscriptRecord {
                    run_id: self.run_id.clone(),
                    backend_id: self.descriptor.backend_id.clone(),
                    attribute: prompt.attribute,
                    from_code: prompt.from_code.clone(),
                    to_code: prompt.to_code.clone(),
                    template_id: prompt.template_id.clone(),
                    repeat_index: prompt.repeat_index,
                    system_text: prompt.system_text.clone(),
                    user_text: prompt.user_text.clone(),
                    response_text,
                    request_key: key,
                    timestamp: Utc::now(),
                };
                self.store.append(&record)?;
                Ok((record, Origin::Network))
            }
        }
    }

    /// One live call under the retry budget: 429/5xx/network errors are
    /// retried with jittered exponential backoff; auth failures and other
    /// 4xx fail immediately.
    fn call_with_retry(
        &self,
        client: &HttpChatClient,
        system_text: &str,
        user_text: &str,
    ) -> Result<String, GatewayError> {
        let backend_id = &self.descriptor.backend_id;
        let budget = self.retry.max_attempts;
        let mut rng = rand::thread_rng();
        let mut last_retryable: Option<CallError> = None;
        for attempt in 1..=budget {
            if attempt > 1 {
                std::thread::sleep(self.retry.backoff_delay(attempt - 1, &mut rng));
            }
            self.limiter.acquire();
            match client.call(system_text, user_text) {
                Ok(text) => return Ok(text),
                Err(CallError::Auth(message)) => {
                    return Err(GatewayError::Auth {
                        backend_id: backend_id.clone(),
                        message,
                    })
                }
                Err(CallError::Fatal(message)) => {
                    return Err(GatewayError::Transport {
                        backend_id: backend_id.clone(),
                        message,
                    })
                }
                Err(retryable) => last_retryable = Some(retryable),
            }
        }
        match last_retryable.expect("loop ran at least once") {
            CallError::RetryableStatus(429) => Err(GatewayError::RateLimit {
                backend_id: backend_id.clone(),
                attempts: budget,
            }),
            CallError::RetryableStatus(code) => Err(GatewayError::Transport {
                backend_id: backend_id.clone(),
                message: format!("HTTP {code} after {budget} attempts"),
            }),
            CallError::Network(message) => Err(GatewayError::Transport {
                backend_id: backend_id.clone(),
                message: format!("{message} (after {budget} attempts)"),
            }),
            CallError::Auth(_) | CallError::Fatal(_) => {
                unreachable!("non-retryable errors return immediately")
            }
        }
    }

    /// Execute `plan` with up to `parallelism` in-flight completions.
    ///
    /// Records come back in plan order regardless of completion order.
    /// Already-recorded request keys are served from the store without any
    /// outgoing request, so re-running a finished plan is free and an
    /// interrupted one resumes. The run aborts with
    /// [`GatewayError::PlanAborted`] once more than
    /// `failure_fraction × plan length` prompts fail.
    pub fn run_plan(
        &self,
        plan: &[Prompt],
        parallelism: usize,
    ) -> Result<RunReport, GatewayError> {
        if parallelism == 0 {
            return Err(GatewayError::Config {
                message: "parallelism must be at least 1".into(),
            });
        }
        let total = plan.len();
        if total == 0 {
            return Ok(RunReport::default());
        }
        let allowed = self.failure_fraction * total as f64;

        let next_index = AtomicUsize::new(0);
        let failed_count = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let workers = parallelism.min(total);
        let (sender, receiver) = mpsc::channel();

        std::thread::scope(|scope| {
            for _ in 0..workers {
                let sender = sender.clone();
                let next_index = &next_index;
                let failed_count = &failed_count;
                let abort = &abort;
                scope.spawn(move || loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let index = next_index.fetch_add(1, Ordering::Relaxed);
                    if index >= total {
                        break;
                    }
                    let result = self.complete_inner(&plan[index]);
                    if result.is_err() {
                        let failed = failed_count.fetch_add(1, Ordering::Relaxed) + 1;
                        if failed as f64 > allowed {
                            abort.store(true, Ordering::Relaxed);
                        }
                    }
                    if sender.send((index, result)).is_err() {
                        break;
                    }
                });
            }
            drop(sender);
        });

        let mut slots: Vec<Option<Result<(TranscriptRecord, Origin), GatewayError>>> =
            (0..total).map(|_| None).collect();
        for (index, result) in receiver {
            slots[index] = Some(result);
        }

        let failed_total = slots
            .iter()
            .filter(|slot| matches!(slot, Some(Err(_))))
            .count();
        if failed_total as f64 > allowed {
            let first = slots
                .into_iter()
                .flatten()
                .find_map(Result::err)
                .expect("a failed slot exists");
            return Err(GatewayError::PlanAborted {
                failed: failed_total,
                total,
                allowed: self.failure_fraction,
                first: Box::new(first),
            });
        }

        let mut report = RunReport::default();
        for (index, slot) in slots.into_iter().enumerate() {
            let slot = slot.expect("every prompt completed: the run did not abort");
            match slot {
                Ok((record, origin)) => {
                    match origin {
                        Origin::Network => report.outgoing_requests += 1,
                        Origin::Cache => report.served_from_cache += 1,
                        Origin::Fixture => report.served_from_replay += 1,
                    }
                    report.records.push(record);
                }
                Err(error) => report.failures.push(PlanFailure {
                    plan_index: index,
                    request_key: self.key_for(&plan[index]),
                    error,
                }),
            }
        }
        Ok(report)
    }
}
