//! JSON bodies of the inference sidecar protocol.
//!
//! | route              | request                         | response                    |
//! |--------------------|---------------------------------|-----------------------------|
//! | `POST /v1/summarize` | `{text, min_len, max_len}`    | `{summary}`                 |
//! | `POST /v1/ner`       | `{text, domain}`              | `{entities: [{text, type, start, end}]}` |
//! | `POST /v1/question`  | `{input, min_len, max_len}`   | `{question}`                |
//! | `POST /v1/qa_spans`  | `{question, context, top_k}`  | `{spans: [{text, start, end, score}]}` |
//! | `GET /v1/health`     |                               | `{status, models}`          |
//!
//! Offsets are character offsets into the request text. Non-2xx responses
//! carry `{"error": str}`.

use serde::{Deserialize, Serialize};

use crate::Domain;

pub const SUMMARIZE_PATH: &str = "/v1/summarize";
pub const NER_PATH: &str = "/v1/ner";
pub const QUESTION_PATH: &str = "/v1/question";
pub const QA_SPANS_PATH: &str = "/v1/qa_spans";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeRequest<'a> {
    pub text: &'a str,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerRequest<'a> {
    pub text: &'a str,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireEntity {
    pub text: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerResponse {
    pub entities: Vec<WireEntity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRequest<'a> {
    /// Serialized prompt, `answer: a1, a2 context: c`.
    pub input: &'a str,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionResponse {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSpansRequest<'a> {
    pub question: &'a str,
    pub context: &'a str,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSpansResponse {
    pub spans: Vec<WireSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default)]
    pub models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

pub fn decode_summarize(body: &[u8]) -> serde_json::Result<SummarizeResponse> {
    serde_json::from_slice(body)
}

pub fn decode_ner(body: &[u8]) -> serde_json::Result<NerResponse> {
    serde_json::from_slice(body)
}

pub fn decode_question(body: &[u8]) -> serde_json::Result<QuestionResponse> {
    serde_json::from_slice(body)
}

pub fn decode_qa_spans(body: &[u8]) -> serde_json::Result<QaSpansResponse> {
    serde_json::from_slice(body)
}

pub fn decode_health(body: &[u8]) -> serde_json::Result<HealthResponse> {
    serde_json::from_slice(body)
}

/// Best-effort extraction of the `error` field of a failure body; falls back
/// to the raw body text.
pub fn decode_error(body: &[u8]) -> String {
    match serde_json::from_slice::<ErrorResponse>(body) {
        Ok(e) => e.error,
        Err(_) => String::from_utf8_lossy(body).into_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shapes() {
        let req = NerRequest {
            text: "Rice",
            domain: Domain::Biomedical,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"text":"Rice","domain":"biomedical"}"#
        );
        let req = QaSpansRequest {
            question: "q",
            context: "c",
            top_k: 5,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"question":"q","context":"c","top_k":5}"#
        );
    }

    #[test]
    fn entity_type_field_is_named_type() {
        let r = decode_ner(br#"{"entities":[{"text":"Yale","type":"ORG","start":0,"end":4}]}"#)
            .unwrap();
        assert_eq!(r.entities[0].entity_type, "ORG");
        assert!(decode_ner(br#"{"entities":[{"text":"Yale","start":0,"end":4}]}"#).is_err());
    }

    #[test]
    fn error_body_fallback() {
        assert_eq!(decode_error(br#"{"error":"boom"}"#), "boom");
        assert_eq!(decode_error(b"gateway timeout"), "gateway timeout");
    }
}
