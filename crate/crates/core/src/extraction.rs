//! Candidate answer sets from passage summaries.
//!
//! A passage is summarized, entities are tagged in the summary, and mentions
//! of one entity type form one candidate list. Lists with fewer than two
//! distinct answers are dropped.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Passage;
use crate::gateway::{EntityMention, Gateway};
use crate::refinement::StageError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub passage_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnswerSet {
    pub passage_id: String,
    pub entity_type: String,
    /// Surface forms in order of first occurrence in the summary.
    pub answers: Vec<String>,
}

/// Everything extraction learned about one passage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub summary: Summary,
    pub sets: Vec<CandidateAnswerSet>,
    /// Entity-type groups dropped for having fewer than two distinct answers.
    pub undersized_groups: usize,
}

/// Canonical comparison key for answer strings: NFC, lowercase, single
/// spaces, and no trailing `.,;:`.
pub fn normalize_answer(s: &str) -> String {
    let folded: String = s.nfc().collect::<String>().to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| matches!(c, '.' | ',' | ';' | ':') || c.is_whitespace())
        .to_string()
}

/// Drop mentions strictly contained in another mention of the same type.
fn drop_nested(mentions: &[EntityMention]) -> Vec<&EntityMention> {
    mentions
        .iter()
        .enumerate()
        .filter(|(i, m)| {
            !mentions.iter().enumerate().any(|(j, o)| {
                let contains = o.start <= m.start && m.end <= o.end;
                let same_range = o.start == m.start && o.end == m.end;
                *i != j && o.entity_type == m.entity_type && contains && (!same_range || j < *i)
            })
        })
        .map(|(_, m)| m)
        .collect()
}

/// Group tagged mentions into candidate answer sets. `mentions` must be
/// sorted by offset. Returns the sets (sorted by entity type) and the number
/// of groups that had fewer than two distinct answers.
pub fn group_mentions(
    passage_id: &str,
    mentions: &[EntityMention],
    excluded_types: &BTreeSet<String>,
) -> (Vec<CandidateAnswerSet>, usize) {
    let mut groups: BTreeMap<&str, (Vec<String>, HashSet<String>)> = BTreeMap::new();
    for m in drop_nested(mentions) {
        if excluded_types
            .iter()
            .any(|t| t.eq_ignore_ascii_case(&m.entity_type))
        {
            continue;
        }
        let (answers, seen) = groups.entry(m.entity_type.as_str()).or_default();
        let key = normalize_answer(&m.text);
        if !key.is_empty() && seen.insert(key) {
            answers.push(m.text.clone());
        }
    }
    let mut undersized = 0;
    let sets = groups
        .into_iter()
        .filter_map(|(ty, (answers, _))| {
            if answers.len() < 2 {
                undersized += 1;
                return None;
            }
            Some(CandidateAnswerSet {
                passage_id: passage_id.to_string(),
                entity_type: ty.to_string(),
                answers,
            })
        })
        .collect();
    (sets, undersized)
}

pub fn extract(
    passage: &Passage,
    gateway: &Gateway,
    excluded_types: &BTreeSet<String>,
) -> Result<Extraction, StageError> {
    let summary = gateway
        .summarize(&passage.text)
        .map_err(|e| StageError::new(&passage.id, "summarize", e))?;
    let mentions = gateway
        .tag_entities(&summary, passage.source)
        .map_err(|e| StageError::new(&passage.id, "tag_entities", e))?;
    let (sets, undersized_groups) = group_mentions(&passage.id, &mentions, excluded_types);
    Ok(Extraction {
        summary: Summary {
            passage_id: passage.id.clone(),
            text: summary,
        },
        sets,
        undersized_groups,
    })
}

pub fn extract_candidates(
    passage: &Passage,
    gateway: &Gateway,
    excluded_types: &BTreeSet<String>,
) -> Result<Vec<CandidateAnswerSet>, StageError> {
    extract(passage, gateway, excluded_types).map(|x| x.sets)
}
