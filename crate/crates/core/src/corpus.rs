//! Passage corpus loading and reproducible sampling.
//!
//! The corpus is line-delimited JSON, one `{"id": .., "text": ..}` object per
//! line. An optional `"source"` field (`general` | `biomedical`) is accepted.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::word_count;
use crate::Domain;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    /// Number of passages to draw.
    pub count: usize,
    pub seed: u64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 42,
            min_words: 50,
            max_words: 600,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.count == 0 {
            return Err(CorpusError::InvalidSpec("count must be at least 1".into()));
        }
        if self.max_words == 0 || self.min_words >= self.max_words {
            return Err(CorpusError::InvalidSpec(format!(
                "min_words ({}) must be below max_words ({})",
                self.min_words, self.max_words
            )));
        }
        Ok(())
    }

    pub fn admits(&self, passage: &Passage) -> bool {
        let words = word_count(&passage.text);
        self.min_words <= words && words <= self.max_words
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate passage id `{id}` on line {line} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("no passages with {min_words}..={max_words} words among {total} loaded")]
    NoEligible {
        min_words: usize,
        max_words: usize,
        total: usize,
    },
    #[error("invalid sampling spec: {0}")]
    InvalidSpec(String),
}

/// Why one corpus line was not turned into a passage.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("empty passage id")]
    EmptyId,
    #[error("passage text is empty after trimming")]
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub passages: Vec<Passage>,
    pub skipped: Vec<SkippedLine>,
}

/// Parse a single corpus line. Invariant violations are reported as errors.
pub fn parse_record(line: &str) -> Result<Passage, RecordError> {
    let passage: Passage =
        serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    if passage.id.is_empty() {
        return Err(RecordError::EmptyId);
    }
    if passage.text.trim().is_empty() {
        return Err(RecordError::EmptyText);
    }
    Ok(passage)
}

/// Parse corpus bytes. Blank lines are ignored; bad records are skipped with
/// a warning; a repeated id is fatal.
pub fn parse_corpus(contents: &str) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in contents.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(passage) => {
                if let Some(&first_line) = seen.get(&passage.id) {
                    return Err(CorpusError::DuplicateId {
                        id: passage.id,
                        line: line_no,
                        first_line,
                    });
                }
                seen.insert(passage.id.clone(), line_no);
                out.passages.push(passage);
            }
            Err(e) => {
                log::warn!("corpus line {line_no}: {e}; skipped");
                out.skipped.push(SkippedLine {
                    line: line_no,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&contents)
}

/// Draw `spec.count` passages uniformly without replacement from those whose
/// word count lies in `[min_words, max_words]`.
///
/// The draw is a partial Fisher-Yates shuffle over the eligible passages (in
/// corpus order) driven by `ChaCha8Rng::seed_from_u64(spec.seed)`; output
/// order is the shuffle order.
pub fn sample_passages(
    corpus: &[Passage],
    spec: &SamplingSpec,
) -> Result<Vec<Passage>, CorpusError> {
    spec.validate()?;
    let mut eligible: Vec<&Passage> = corpus.iter().filter(|p| spec.admits(p)).collect();
    if eligible.is_empty() {
        return Err(CorpusError::NoEligible {
            min_words: spec.min_words,
            max_words: spec.max_words,
            total: corpus.len(),
        });
    }
    let n = eligible.len();
    let take = spec.count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for i in 0..take {
        let j = rng.gen_range(i..n);
        eligible.swap(i, j);
    }
    Ok(eligible[..take].iter().map(|p| (*p).clone()).collect())
}
