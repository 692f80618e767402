//! BIO-tagged export for sequence-tagging list QA models.
//!
//! Each dataset instance becomes one JSON line
//! `{"id", "question_tokens", "context_tokens", "labels"}` with whitespace
//! tokens. A context token touching an answer's character range is tagged
//! `B` when it opens that answer and `I` when it continues it; all other
//! tokens are `O`. Answers that start or end mid-token claim the whole
//! covering token.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{parse_dataset, QaInstance};
use super::PipelineError;
use crate::text::ranges_overlap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedRecord {
    pub id: String,
    pub question_tokens: Vec<String>,
    pub context_tokens: Vec<String>,
    pub labels: Vec<String>,
}

/// Whitespace tokens with their character ranges.
pub fn tokenize_with_offsets(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut current: Option<(String, usize)> = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if let Some((tok, start)) = current.take() {
                out.push((tok, start, i));
            }
        } else {
            current.get_or_insert_with(|| (String::new(), i)).0.push(c);
        }
    }
    if let Some((tok, start)) = current {
        let end = start + tok.chars().count();
        out.push((tok, start, end));
    }
    out
}

pub fn bio_labels(
    tokens: &[(String, usize, usize)],
    answers: &[(usize, usize)],
) -> Vec<&'static str> {
    let mut prev: Option<usize> = None;
    tokens
        .iter()
        .map(|&(_, s, e)| {
            let hit = answers.iter().position(|&r| ranges_overlap(r, (s, e)));
            let label = match hit {
                None => "O",
                Some(a) if prev == Some(a) => "I",
                Some(_) => "B",
            };
            prev = hit;
            label
        })
        .collect()
}

pub fn to_tagged(inst: &QaInstance) -> TaggedRecord {
    let tokens = tokenize_with_offsets(&inst.context);
    let ranges: Vec<(usize, usize)> = inst
        .answers
        .iter()
        .map(|a| (a.char_start, a.char_end))
        .collect();
    TaggedRecord {
        id: inst.id.clone(),
        question_tokens: inst
            .question
            .split_whitespace()
            .map(str::to_string)
            .collect(),
        labels: bio_labels(&tokens, &ranges)
            .into_iter()
            .map(str::to_string)
            .collect(),
        context_tokens: tokens.into_iter().map(|(t, _, _)| t).collect(),
    }
}

/// Convert a JSONL dataset into BIO-tagged JSONL. Returns records written.
pub fn export_multispan(
    dataset_path: impl AsRef<Path>,
    out_path: impl AsRef<Path>,
) -> Result<usize, PipelineError> {
    let (dataset_path, out_path) = (dataset_path.as_ref(), out_path.as_ref());
    let contents = fs::read_to_string(dataset_path).map_err(|source| PipelineError::Io {
        path: dataset_path.to_path_buf(),
        source,
    })?;
    let io_err = |source| PipelineError::Io {
        path: out_path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(out_path).map_err(io_err)?);
    let mut written = 0;
    for inst in parse_dataset(&contents) {
        let line = serde_json::to_string(&to_tagged(&inst)).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err)?;
        written += 1;
    }
    out.flush().map_err(io_err)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(context: &str, answers: &[(usize, usize)]) -> Vec<&'static str> {
        bio_labels(&tokenize_with_offsets(context), answers)
    }

    #[test]
    fn tokens_carry_char_offsets() {
        let toks = tokenize_with_offsets("  Rice and  Genève ");
        assert_eq!(
            toks,
            vec![
                ("Rice".into(), 2, 6),
                ("and".into(), 7, 10),
                ("Genève".into(), 12, 18)
            ]
        );
    }

    #[test]
    fn separate_single_token_answers() {
        assert_eq!(
            labels("Rice and Yale win", &[(0, 4), (9, 13)]),
            ["B", "O", "B", "O"]
        );
    }

    #[test]
    fn multi_token_answer() {
        assert_eq!(labels("Le Notre", &[(0, 8)]), ["B", "I"]);
    }

    #[test]
    fn adjacent_answers_both_begin() {
        assert_eq!(labels("Rice Yale", &[(0, 4), (5, 9)]), ["B", "B"]);
    }

    #[test]
    fn partial_token_answer_claims_token() {
        // "Yale's" covers an answer ending mid-token
        assert_eq!(labels("at Yale's campus", &[(3, 7)]), ["O", "B", "O"]);
    }
}
