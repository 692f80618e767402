//! Model contracts (summarizer, entity tagger, question generator, QA span
//! scorer) and the [`Gateway`] that fronts a backend.
//!
//! The gateway owns everything that must behave identically for every
//! backend: the question-generation prompt, input length caps, excluded
//! entity types, output validation, ordering, and retries.

pub mod protocol;
mod remote;
mod stub;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{truncate_units, CharMap};
use crate::Domain;
use protocol::{NerRequest, QaSpansRequest, QuestionRequest, SummarizeRequest};

pub use remote::{health, RemoteBackend};
pub use stub::{Lexicon, QaFixture, StubBackend, LEXICON_FILE, QA_FIXTURE_FILE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub text: String,
    pub entity_type: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    pub endpoint_url: Option<String>,
    pub stub_fixture_dir: Option<PathBuf>,
    pub summary_min_len: usize,
    pub summary_max_len: usize,
    pub question_min_len: usize,
    pub question_max_len: usize,
    pub qa_max_question_len: usize,
    pub qa_max_context_len: usize,
    pub top_k: usize,
    /// Attempts per call for retryable failures.
    pub max_attempts: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    /// Concurrent requests allowed against the remote sidecar.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Stub,
            endpoint_url: None,
            stub_fixture_dir: None,
            summary_min_len: 64,
            summary_max_len: 128,
            question_min_len: 32,
            question_max_len: 128,
            qa_max_question_len: 128,
            qa_max_context_len: 384,
            top_k: 20,
            max_attempts: 3,
            backoff_ms: 200,
            max_in_flight: 8,
            timeout_secs: 120,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.summary_min_len >= self.summary_max_len {
            return Err("summary_min_len must be below summary_max_len".into());
        }
        if self.question_min_len >= self.question_max_len {
            return Err("question_min_len must be below question_max_len".into());
        }
        if self.top_k == 0 {
            return Err("top_k must be at least 1".into());
        }
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        match self.backend {
            BackendKind::Stub if self.stub_fixture_dir.is_none() => {
                Err("stub backend requires a fixture directory".into())
            }
            BackendKind::Remote if self.endpoint_url.is_none() => {
                Err("remote backend requires an endpoint URL".into())
            }
            _ => Ok(()),
        }
    }
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("sidecar returned HTTP {code}: {message}")]
    Status { code: u16, message: String },
    #[error("malformed sidecar response: {0}")]
    Protocol(String),
    #[error("fixture error: {0}")]
    Fixture(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_) | BackendError::Status { .. }
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("{op} failed after {attempts} attempts: {last}")]
    Exhausted {
        op: &'static str,
        attempts: u32,
        last: BackendError,
    },
    #[error("{op} failed: {source}")]
    Failed {
        op: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("{op} returned empty output")]
    EmptyOutput { op: &'static str },
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// True for failures that a later retry of the whole call could clear.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Exhausted { .. })
    }
}

/// One realization of the four model contracts.
///
/// Backends return raw model output; the [`Gateway`] validates and orders it.
pub trait ModelBackend: Send + Sync {
    fn summarize(&self, req: &SummarizeRequest<'_>) -> Result<String, BackendError>;

    fn tag_entities(&self, req: &NerRequest<'_>) -> Result<Vec<EntityMention>, BackendError>;

    /// `answers` are the un-serialized answers behind `req.input`; remote
    /// backends ignore them.
    fn generate_question(
        &self,
        req: &QuestionRequest<'_>,
        answers: &[String],
    ) -> Result<String, BackendError>;

    fn qa_spans(&self, req: &QaSpansRequest<'_>) -> Result<Vec<ScoredSpan>, BackendError>;
}

/// Serialized question-generation input: `answer: a1, a2 context: c`.
pub fn question_prompt(answers: &[String], context: &str) -> String {
    format!("answer: {} context: {}", answers.join(", "), context)
}

/// Total order on QA spans: score descending, then start, then end.
pub fn span_order(a: &ScoredSpan, b: &ScoredSpan) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.cmp(&b.start))
        .then(a.end.cmp(&b.end))
}

#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ModelBackend>,
    config: GatewayConfig,
    excluded_types: BTreeSet<String>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("config", &self.config)
            .field("excluded_types", &self.excluded_types)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(
        backend: Arc<dyn ModelBackend>,
        config: GatewayConfig,
        excluded_types: impl IntoIterator<Item = String>,
    ) -> Self {
        Self {
            backend,
            config,
            excluded_types: excluded_types.into_iter().collect(),
        }
    }

    /// Build the backend named by `config` (stub fixtures or sidecar client).
    pub fn from_config(
        config: GatewayConfig,
        excluded_types: impl IntoIterator<Item = String>,
    ) -> Result<Self, GatewayError> {
        config.validate().map_err(GatewayError::Config)?;
        let backend: Arc<dyn ModelBackend> = match config.backend {
            BackendKind::Stub => {
                let dir = config.stub_fixture_dir.as_ref().expect("validated");
                Arc::new(
                    StubBackend::from_dir(dir).map_err(|e| GatewayError::Config(e.to_string()))?,
                )
            }
            BackendKind::Remote => {
                let url = config.endpoint_url.as_ref().expect("validated");
                Arc::new(RemoteBackend::new(
                    url,
                    config.max_in_flight,
                    Duration::from_secs(config.timeout_secs),
                ))
            }
        };
        Ok(Self::new(backend, config, excluded_types))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn is_excluded(&self, entity_type: &str) -> bool {
        self.excluded_types
            .iter()
            .any(|t| t.eq_ignore_ascii_case(entity_type))
    }

    fn with_retry<T>(
        &self,
        op: &'static str,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, GatewayError> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 1;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if !e.is_retryable() => return Err(GatewayError::Failed { op, source: e }),
                Err(e) if attempt >= self.config.max_attempts => {
                    return Err(GatewayError::Exhausted {
                        op,
                        attempts: attempt,
                        last: e,
                    })
                }
                Err(e) => {
                    log::debug!("{op} attempt {attempt} failed: {e}; retrying");
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    pub fn summarize(&self, passage_text: &str) -> Result<String, GatewayError> {
        let req = SummarizeRequest {
            text: passage_text,
            min_len: self.config.summary_min_len,
            max_len: self.config.summary_max_len,
        };
        let summary = self.with_retry("summarize", || self.backend.summarize(&req))?;
        if summary.trim().is_empty() {
            return Err(GatewayError::EmptyOutput { op: "summarize" });
        }
        Ok(summary)
    }

    /// Entity mentions in `text`, sorted by offset, with excluded types and
    /// mentions whose offsets do not reproduce their text removed.
    pub fn tag_entities(
        &self,
        text: &str,
        domain: Domain,
    ) -> Result<Vec<EntityMention>, GatewayError> {
        let req = NerRequest { text, domain };
        let raw = self.with_retry("tag_entities", || self.backend.tag_entities(&req))?;
        let map = CharMap::new(text);
        let mut mentions: Vec<EntityMention> = raw
            .into_iter()
            .filter(|m| {
                let ok = !m.entity_type.is_empty()
                    && m.start < m.end
                    && map.slice(m.start, m.end) == Some(m.text.as_str());
                if !ok {
                    log::warn!("dropping entity with invalid offsets: {m:?}");
                }
                ok
            })
            .filter(|m| !self.is_excluded(&m.entity_type))
            .collect();
        mentions.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)));
        Ok(mentions)
    }

    pub fn generate_question(
        &self,
        answers: &[String],
        context: &str,
    ) -> Result<String, GatewayError> {
        let prompt = question_prompt(answers, context);
        let req = QuestionRequest {
            input: &prompt,
            min_len: self.config.question_min_len,
            max_len: self.config.question_max_len,
        };
        let question = self.with_retry("generate_question", || {
            self.backend.generate_question(&req, answers)
        })?;
        if question.trim().is_empty() {
            return Err(GatewayError::EmptyOutput {
                op: "generate_question",
            });
        }
        Ok(question)
    }

    /// True when either QA input exceeds its length cap and would be cut.
    pub fn qa_truncates(&self, question: &str, context: &str) -> bool {
        truncate_units(question, self.config.qa_max_question_len).1
            || truncate_units(context, self.config.qa_max_context_len).1
    }

    /// At most `top_k` answer spans for `question` over `context`, in
    /// [`span_order`]. Offsets are valid against `context`.
    pub fn qa_top_spans(
        &self,
        question: &str,
        context: &str,
    ) -> Result<Vec<ScoredSpan>, GatewayError> {
        let (question, _) = truncate_units(question, self.config.qa_max_question_len);
        let (context, _) = truncate_units(context, self.config.qa_max_context_len);
        let req = QaSpansRequest {
            question,
            context,
            top_k: self.config.top_k,
        };
        let raw = self.with_retry("qa_spans", || self.backend.qa_spans(&req))?;
        let map = CharMap::new(context);
        let mut spans: Vec<ScoredSpan> = raw
            .into_iter()
            .filter(|s| {
                let ok = s.score.is_finite()
                    && (0.0..=1.0).contains(&s.score)
                    && s.start < s.end
                    && map.slice(s.start, s.end) == Some(s.text.as_str());
                if !ok {
                    log::warn!("dropping invalid QA span: {s:?}");
                }
                ok
            })
            .collect();
        spans.sort_by(span_order);
        spans.truncate(self.config.top_k);
        Ok(spans)
    }
}
