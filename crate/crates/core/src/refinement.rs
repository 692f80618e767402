//! Iterative answer filtering, answer expansion, and final validation.
//!
//! Starting from a candidate answer list, a question is generated and the QA
//! scorer is asked for its top spans. Answers whose best matching span
//! scores below `tau` are removed and the question is regenerated from the
//! survivors, until the answer set stops changing or `max_iters` filter
//! passes have run. The surviving set is then expanded with further QA
//! spans scoring at least as high as its weakest member, a final question is
//! generated for the expanded set, and the instance keeps that question only
//! if it retains every answer.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Passage;
use crate::extraction::{normalize_answer, CandidateAnswerSet};
use crate::gateway::{Gateway, GatewayError, ScoredSpan};
use crate::text::ranges_overlap;
use crate::Domain;

/// A gateway failure attributed to the passage being processed.
#[derive(Debug, Error)]
#[error("passage {passage_id}: {stage} failed: {source}")]
pub struct StageError {
    pub passage_id: String,
    pub stage: &'static str,
    #[source]
    pub source: GatewayError,
}

impl StageError {
    pub fn new(passage_id: &str, stage: &'static str, source: GatewayError) -> Self {
        Self {
            passage_id: passage_id.to_string(),
            stage,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnswer {
    pub text: String,
    pub confidence: f64,
    /// Character range in the passage of the best matching QA span.
    pub span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Filtered,
    Expanded,
    Finalized,
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// The candidate list had fewer than two answers to begin with.
    TooFewInitial,
    /// A filter pass left zero or one answer.
    FilteredOut,
    /// Fewer than two answers could be placed in the passage without overlap.
    Unlocalizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    /// Confidence threshold, exclusive of 0 and 1.
    pub tau: f64,
    /// Maximum number of filter passes.
    pub max_iters: usize,
    /// Require expansion spans to score strictly above the weakest answer.
    pub strict_expansion_floor: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self::for_domain(Domain::General)
    }
}

impl RefineParams {
    pub fn for_domain(domain: Domain) -> Self {
        Self {
            tau: domain.default_tau(),
            max_iters: 3,
            strict_expansion_floor: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.max_iters == 0 {
            return Err("max_iters must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftInstance {
    pub passage_id: String,
    pub entity_type: String,
    pub question: String,
    pub answers: Vec<ScoredAnswer>,
    /// Filter passes executed.
    pub iteration: usize,
    pub stage: Stage,
    pub discard_reason: Option<DiscardReason>,
    /// Answer list entering each filter pass, then the list that left the last one.
    pub answer_trace: Vec<Vec<String>>,
    /// Positions in `answers` added by expansion.
    pub expanded_indices: Vec<usize>,
    /// The final question did not retain every answer, so the question from
    /// the filtering loop was kept.
    pub fallback: bool,
}

impl DraftInstance {
    fn discard(mut self, reason: DiscardReason) -> Self {
        self.stage = Stage::Discarded;
        self.discard_reason = Some(reason);
        self
    }

    pub fn answer_texts(&self) -> Vec<String> {
        self.answers.iter().map(|a| a.text.clone()).collect()
    }
}

fn answer_key_set<'a>(answers: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    answers.into_iter().map(normalize_answer).collect()
}

/// Highest-scoring span matching `answer` under normalization. `spans` must
/// be in [`crate::gateway::span_order`].
pub fn best_match<'a>(answer: &str, spans: &'a [ScoredSpan]) -> Option<&'a ScoredSpan> {
    let key = normalize_answer(answer);
    spans.iter().find(|s| normalize_answer(&s.text) == key)
}

/// Score each answer by its best matching span; unmatched answers get
/// confidence 0 and no span.
pub fn score_against(answers: &[String], spans: &[ScoredSpan]) -> Vec<ScoredAnswer> {
    answers
        .iter()
        .map(|a| match best_match(a, spans) {
            Some(s) => ScoredAnswer {
                text: a.clone(),
                confidence: s.score,
                span: Some((s.start, s.end)),
            },
            None => ScoredAnswer {
                text: a.clone(),
                confidence: 0.0,
                span: None,
            },
        })
        .collect()
}

pub fn score_candidates(
    question: &str,
    passage_text: &str,
    answers: &[String],
    gateway: &Gateway,
) -> Result<Vec<ScoredAnswer>, GatewayError> {
    let spans = gateway.qa_top_spans(question, passage_text)?;
    Ok(score_against(answers, &spans))
}

/// Answers with confidence `>= tau`, order preserved.
pub fn filter_answers(scored: &[ScoredAnswer], tau: f64) -> Vec<ScoredAnswer> {
    scored
        .iter()
        .filter(|a| a.confidence >= tau)
        .cloned()
        .collect()
}

pub fn localize_answer(
    answer: &str,
    question: &str,
    passage_text: &str,
    gateway: &Gateway,
) -> Result<Option<(usize, usize)>, GatewayError> {
    let spans = gateway.qa_top_spans(question, passage_text)?;
    Ok(best_match(answer, &spans).map(|s| (s.start, s.end)))
}

pub fn refine_iteratively(
    passage: &Passage,
    initial: &CandidateAnswerSet,
    params: &RefineParams,
    gateway: &Gateway,
) -> Result<DraftInstance, StageError> {
    let err = |stage| move |e| StageError::new(&passage.id, stage, e);
    let mut draft = DraftInstance {
        passage_id: passage.id.clone(),
        entity_type: initial.entity_type.clone(),
        question: String::new(),
        answers: initial
            .answers
            .iter()
            .map(|a| ScoredAnswer {
                text: a.clone(),
                confidence: 0.0,
                span: None,
            })
            .collect(),
        iteration: 0,
        stage: Stage::Initial,
        discard_reason: None,
        answer_trace: vec![initial.answers.clone()],
        expanded_indices: Vec::new(),
        fallback: false,
    };
    if initial.answers.len() < 2 {
        return Ok(draft.discard(DiscardReason::TooFewInitial));
    }

    let mut answers = initial.answers.clone();
    let mut question = gateway
        .generate_question(&answers, &passage.text)
        .map_err(err("generate_question"))?;
    draft.question = question.clone();
    let mut previous: Option<BTreeSet<String>> = None;
    let mut validated: Option<(String, Vec<ScoredAnswer>)> = None;

    while previous.as_ref() != Some(&answer_key_set(answers.iter().map(String::as_str)))
        && draft.iteration < params.max_iters
    {
        let scored = score_candidates(&question, &passage.text, &answers, gateway)
            .map_err(err("qa_spans"))?;
        let kept = filter_answers(&scored, params.tau);
        draft.iteration += 1;
        let next: Vec<String> = kept.iter().map(|a| a.text.clone()).collect();
        draft.answer_trace.push(next.clone());
        if kept.len() <= 1 {
            draft.answers = kept;
            return Ok(draft.discard(DiscardReason::FilteredOut));
        }
        let next_question = gateway
            .generate_question(&next, &passage.text)
            .map_err(err("generate_question"))?;
        validated = Some((question, kept));
        previous = Some(answer_key_set(answers.iter().map(String::as_str)));
        answers = next;
        question = next_question;
    }

    // The returned pair is the last answer set that passed a filter together
    // with the question it passed under.
    let (question, kept) = validated.expect("max_iters >= 1 runs at least one pass");
    draft.question = question;
    draft.answers = kept;
    draft.stage = Stage::Filtered;
    Ok(draft)
}

/// Append QA spans scoring at least the weakest current answer that are new
/// under normalization and overlap no existing span. Returns the indices of
/// the appended answers.
pub fn expand_with(
    answers: &mut Vec<ScoredAnswer>,
    spans: &[ScoredSpan],
    strict_floor: bool,
) -> Vec<usize> {
    let floor = answers
        .iter()
        .map(|a| a.confidence)
        .fold(f64::INFINITY, f64::min);
    let mut keys = answer_key_set(answers.iter().map(|a| a.text.as_str()));
    let mut added = Vec::new();
    for s in spans {
        let clears = if strict_floor {
            s.score > floor
        } else {
            s.score >= floor
        };
        if !clears {
            continue;
        }
        let overlaps = answers
            .iter()
            .filter_map(|a| a.span)
            .any(|r| ranges_overlap(r, (s.start, s.end)));
        if overlaps || !keys.insert(normalize_answer(&s.text)) {
            continue;
        }
        added.push(answers.len());
        answers.push(ScoredAnswer {
            text: s.text.clone(),
            confidence: s.score,
            span: Some((s.start, s.end)),
        });
    }
    added
}

pub fn expand_answers(
    passage: &Passage,
    draft: &DraftInstance,
    params: &RefineParams,
    gateway: &Gateway,
) -> Result<DraftInstance, StageError> {
    debug_assert_eq!(draft.stage, Stage::Filtered);
    let spans = gateway
        .qa_top_spans(&draft.question, &passage.text)
        .map_err(|e| StageError::new(&passage.id, "qa_spans", e))?;
    let mut out = draft.clone();
    out.expanded_indices = expand_with(&mut out.answers, &spans, params.strict_expansion_floor);
    out.stage = Stage::Expanded;
    Ok(out)
}

/// Keep answers that have a span, dropping any whose span overlaps a
/// higher-confidence answer. Returns kept answers in original order plus the
/// surviving original indices.
fn place_answers(answers: &[ScoredAnswer]) -> (Vec<ScoredAnswer>, Vec<usize>) {
    let mut order: Vec<usize> = (0..answers.len())
        .filter(|&i| answers[i].span.is_some())
        .collect();
    order.sort_by(|&a, &b| {
        answers[b]
            .confidence
            .total_cmp(&answers[a].confidence)
            .then(a.cmp(&b))
    });
    let mut taken: Vec<usize> = Vec::new();
    for i in order {
        let r = answers[i].span.expect("filtered");
        if taken
            .iter()
            .all(|&j| !ranges_overlap(r, answers[j].span.expect("filtered")))
        {
            taken.push(i);
        }
    }
    taken.sort_unstable();
    (taken.iter().map(|&i| answers[i].clone()).collect(), taken)
}

pub fn finalize_instance(
    passage: &Passage,
    expanded: &DraftInstance,
    params: &RefineParams,
    gateway: &Gateway,
) -> Result<DraftInstance, StageError> {
    debug_assert_eq!(expanded.stage, Stage::Expanded);
    let err = |stage| move |e| StageError::new(&passage.id, stage, e);
    let texts = expanded.answer_texts();
    let final_question = gateway
        .generate_question(&texts, &passage.text)
        .map_err(err("generate_question"))?;
    let rescored = score_candidates(&final_question, &passage.text, &texts, gateway)
        .map_err(err("qa_spans"))?;
    let retained = filter_answers(&rescored, params.tau);

    let mut out = expanded.clone();
    if retained.len() == rescored.len() {
        out.question = final_question;
        out.answers = rescored;
        out.fallback = false;
    } else {
        // expanded answers already carry their spans under the loop question
        out.fallback = true;
    }

    let (placed, kept_idx) = place_answers(&out.answers);
    out.expanded_indices = kept_idx
        .iter()
        .enumerate()
        .filter(|(_, orig)| expanded.expanded_indices.contains(orig))
        .map(|(new, _)| new)
        .collect();
    out.answers = placed;
    if out.answers.len() < 2 {
        return Ok(out.discard(DiscardReason::Unlocalizable));
    }
    out.stage = Stage::Finalized;
    Ok(out)
}

/// Filtering, expansion, and finalization for one candidate set.
pub fn refine_candidate_set(
    passage: &Passage,
    candidates: &CandidateAnswerSet,
    params: &RefineParams,
    gateway: &Gateway,
) -> Result<DraftInstance, StageError> {
    let filtered = refine_iteratively(passage, candidates, params, gateway)?;
    if filtered.stage == Stage::Discarded {
        return Ok(filtered);
    }
    let expanded = expand_answers(passage, &filtered, params, gateway)?;
    finalize_instance(passage, &expanded, params, gateway)
}
