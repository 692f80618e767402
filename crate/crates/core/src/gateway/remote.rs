//! HTTP client for the inference sidecar.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use ureq::Agent;

use super::protocol::{self, NerRequest, QaSpansRequest, QuestionRequest, SummarizeRequest};
use super::{BackendError, EntityMention, ModelBackend, ScoredSpan};

/// Counting semaphore bounding concurrent sidecar requests.
#[derive(Debug)]
struct InFlight {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(cap: usize) -> Self {
        Self {
            free: Mutex::new(cap.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}{}", base.trim_end_matches('/'), path)
}

/// Read a response body, mapping non-2xx statuses to [`BackendError::Status`].
fn read_body(mut resp: ureq::http::Response<ureq::Body>) -> Result<Vec<u8>, BackendError> {
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_vec()
        .map_err(|e| BackendError::Transport(e.to_string()))?;
    if (200..300).contains(&status) {
        Ok(body)
    } else {
        Err(BackendError::Status {
            code: status,
            message: protocol::decode_error(&body),
        })
    }
}

#[derive(Debug)]
pub struct RemoteBackend {
    base_url: String,
    agent: Agent,
    in_flight: InFlight,
}

impl RemoteBackend {
    pub fn new(base_url: &str, max_in_flight: usize, timeout: Duration) -> Self {
        Self {
            base_url: base_url.to_string(),
            agent: agent(timeout),
            in_flight: InFlight::new(max_in_flight),
        }
    }

    fn post(&self, path: &str, body: &impl Serialize) -> Result<Vec<u8>, BackendError> {
        let payload =
            serde_json::to_vec(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let _permit = self.in_flight.acquire();
        let resp = self
            .agent
            .post(join_url(&self.base_url, path))
            .header("content-type", "application/json")
            .send(&payload[..])
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        read_body(resp)
    }
}

fn protocol_err(e: serde_json::Error) -> BackendError {
    BackendError::Protocol(e.to_string())
}

impl ModelBackend for RemoteBackend {
    fn summarize(&self, req: &SummarizeRequest<'_>) -> Result<String, BackendError> {
        let body = self.post(protocol::SUMMARIZE_PATH, req)?;
        Ok(protocol::decode_summarize(&body)
            .map_err(protocol_err)?
            .summary)
    }

    fn tag_entities(&self, req: &NerRequest<'_>) -> Result<Vec<EntityMention>, BackendError> {
        let body = self.post(protocol::NER_PATH, req)?;
        let resp = protocol::decode_ner(&body).map_err(protocol_err)?;
        Ok(resp
            .entities
            .into_iter()
            .map(|e| EntityMention {
                text: e.text,
                entity_type: e.entity_type,
                start: e.start,
                end: e.end,
            })
            .collect())
    }

    fn generate_question(
        &self,
        req: &QuestionRequest<'_>,
        _answers: &[String],
    ) -> Result<String, BackendError> {
        let body = self.post(protocol::QUESTION_PATH, req)?;
        Ok(protocol::decode_question(&body)
            .map_err(protocol_err)?
            .question)
    }

    fn qa_spans(&self, req: &QaSpansRequest<'_>) -> Result<Vec<ScoredSpan>, BackendError> {
        let body = self.post(protocol::QA_SPANS_PATH, req)?;
        let resp = protocol::decode_qa_spans(&body).map_err(protocol_err)?;
        Ok(resp
            .spans
            .into_iter()
            .map(|s| ScoredSpan {
                text: s.text,
                start: s.start,
                end: s.end,
                score: s.score,
            })
            .collect())
    }
}

/// `GET /v1/health` against `base_url`.
pub fn health(base_url: &str, timeout: Duration) -> Result<protocol::HealthResponse, BackendError> {
    let resp = agent(timeout)
        .get(join_url(base_url, protocol::HEALTH_PATH))
        .call()
        .map_err(|e| BackendError::Transport(e.to_string()))?;
    let body = read_body(resp)?;
    protocol::decode_health(&body).map_err(protocol_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_joining() {
        assert_eq!(join_url("http://h:1/", "/v1/ner"), "http://h:1/v1/ner");
        assert_eq!(join_url("http://h:1", "/v1/ner"), "http://h:1/v1/ner");
    }

    #[test]
    fn connection_refused_is_retryable() {
        // port 9 (discard) on localhost is closed in the sandbox
        let backend = RemoteBackend::new("http://127.0.0.1:9", 1, Duration::from_secs(2));
        let req = SummarizeRequest {
            text: "x",
            min_len: 1,
            max_len: 2,
        };
        let err = backend.summarize(&req).unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
    }
}
