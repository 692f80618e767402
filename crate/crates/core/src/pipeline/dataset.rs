//! JSONL dataset records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Passage;
use crate::extraction::normalize_answer;
use crate::refinement::{DraftInstance, Stage};
use crate::text::{ranges_overlap, CharMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub summary: String,
    /// Filter passes run before expansion.
    pub iterations: usize,
    /// Positions in `answers` that came from expansion.
    pub expanded_indices: Vec<usize>,
    pub fallback: bool,
    /// Answer list entering each filter pass, then the list that left the last one.
    #[serde(default)]
    pub answer_trace: Vec<Vec<String>>,
    /// Set when the QA inputs for the recorded question exceeded a length cap.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub qa_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub passage_id: String,
    pub context: String,
    pub question: String,
    pub answers: Vec<Answer>,
    pub entity_type: String,
    pub provenance: Provenance,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("instance {0} has fewer than two answers")]
    TooFewAnswers(String),
    #[error("instance {id}: answer {index} is not sorted by char_start")]
    Unsorted { id: String, index: usize },
    #[error("instance {id}: answer {index} does not match its context range")]
    OffsetMismatch { id: String, index: usize },
    #[error("instance {id}: answers {a} and {b} overlap")]
    Overlap { id: String, a: usize, b: usize },
}

pub fn instance_id(passage_id: &str, entity_type: &str) -> String {
    format!("{passage_id}#{entity_type}")
}

impl QaInstance {
    /// Build a dataset record from a finalized draft. Answers are ordered by
    /// position and carry the exact passage text of their span.
    pub fn from_draft(
        draft: &DraftInstance,
        passage: &Passage,
        summary: &str,
        qa_truncated: bool,
    ) -> Option<Self> {
        if draft.stage != Stage::Finalized {
            return None;
        }
        let map = CharMap::new(&passage.text);
        let mut placed: Vec<(usize, Answer)> = draft
            .answers
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (start, end) = a.span?;
                Some((
                    i,
                    Answer {
                        text: map.slice(start, end)?.to_string(),
                        char_start: start,
                        char_end: end,
                        confidence: a.confidence,
                    },
                ))
            })
            .collect::<Option<_>>()?;
        placed.sort_by_key(|(_, a)| (a.char_start, a.char_end));
        let expanded_indices = placed
            .iter()
            .enumerate()
            .filter(|(_, (orig, _))| draft.expanded_indices.contains(orig))
            .map(|(new, _)| new)
            .collect();
        Some(Self {
            id: instance_id(&draft.passage_id, &draft.entity_type),
            passage_id: draft.passage_id.clone(),
            context: passage.text.clone(),
            question: draft.question.clone(),
            answers: placed.into_iter().map(|(_, a)| a).collect(),
            entity_type: draft.entity_type.clone(),
            provenance: Provenance {
                summary: summary.to_string(),
                iterations: draft.iteration,
                expanded_indices,
                fallback: draft.fallback,
                answer_trace: draft.answer_trace.clone(),
                qa_truncated,
            },
        })
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.answers.len() < 2 {
            return Err(InstanceError::TooFewAnswers(self.id.clone()));
        }
        let map = CharMap::new(&self.context);
        for (i, a) in self.answers.iter().enumerate() {
            if i > 0 && self.answers[i - 1].char_start > a.char_start {
                return Err(InstanceError::Unsorted {
                    id: self.id.clone(),
                    index: i,
                });
            }
            let matches = a.char_start < a.char_end
                && map
                    .slice(a.char_start, a.char_end)
                    .is_some_and(|s| normalize_answer(s) == normalize_answer(&a.text));
            if !matches {
                return Err(InstanceError::OffsetMismatch {
                    id: self.id.clone(),
                    index: i,
                });
            }
        }
        for (i, a) in self.answers.iter().enumerate() {
            for (j, b) in self.answers.iter().enumerate().skip(i + 1) {
                if ranges_overlap((a.char_start, a.char_end), (b.char_start, b.char_end)) {
                    return Err(InstanceError::Overlap {
                        id: self.id.clone(),
                        a: i,
                        b: j,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One JSON line, no trailing newline.
pub fn serialize_instance(inst: &QaInstance) -> String {
    serde_json::to_string(inst).expect("QaInstance serializes infallibly")
}

/// Parse and validate one dataset line.
pub fn parse_instance(line: &str) -> Result<QaInstance, InstanceError> {
    let inst: QaInstance =
        serde_json::from_str(line).map_err(|e| InstanceError::Malformed(e.to_string()))?;
    inst.validate()?;
    Ok(inst)
}

/// Parse every non-blank line, warning about and skipping invalid ones.
pub fn parse_dataset(contents: &str) -> Vec<QaInstance> {
    contents
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .filter_map(|(i, line)| match parse_instance(line) {
            Ok(inst) => Some(inst),
            Err(e) => {
                log::warn!("dataset line {}: {e}; skipped", i + 1);
                None
            }
        })
        .collect()
}
