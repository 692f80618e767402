//! Deterministic offline backend.
//!
//! * summarizer: the first two sentences of the input, verbatim.
//! * tagger: longest-match lookup over a lexicon (`lexicon.json`,
//!   `{"surface form": "TYPE"}`), matches must sit on word boundaries.
//! * question generator: `Which entities include <first answer> in this context?`
//! * QA scorer: `qa.json`, `{"<question>": {"<span text>": score}}`. The
//!   key `"*"` applies to questions without their own entry. Each fixture
//!   span found in the context is returned at its first word-bounded
//!   occurrence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use super::protocol::{NerRequest, QaSpansRequest, QuestionRequest, SummarizeRequest};
use super::{BackendError, EntityMention, ModelBackend, ScoredSpan};

pub const LEXICON_FILE: &str = "lexicon.json";
pub const QA_FIXTURE_FILE: &str = "qa.json";

const SENTENCES_IN_SUMMARY: usize = 2;
const WILDCARD_QUESTION: &str = "*";

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Leading `n` sentences of `text`, trimmed. A sentence ends at a run of
/// `.`, `!` or `?`; text without a terminator is one sentence.
pub fn leading_sentences(text: &str, n: usize) -> &str {
    let mut found = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if !is_terminator(c) {
            continue;
        }
        while chars.peek().is_some_and(|&(_, c)| is_terminator(c)) {
            chars.next();
        }
        found += 1;
        if found == n {
            let end = chars.peek().map_or(text.len(), |&(i, _)| i);
            return text[..end].trim();
        }
    }
    text.trim()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Surface form → entity type dictionary with longest-match tagging.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, String>,
    max_chars: usize,
}

impl Lexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let entries: HashMap<String, String> = entries
            .into_iter()
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .collect();
        let max_chars = entries.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Self { entries, max_chars }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BackendError> {
        let map: BTreeMap<String, String> = serde_json::from_slice(bytes)
            .map_err(|e| BackendError::Fixture(format!("lexicon: {e}")))?;
        Ok(Self::new(map))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tag(&self, text: &str) -> Vec<EntityMention> {
        let chars: Vec<char> = text.chars().collect();
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        let n = chars.len();
        let starts_word =
            |i: usize| i < n && is_word_char(chars[i]) && (i == 0 || !is_word_char(chars[i - 1]));
        let ends_word =
            |j: usize| j > 0 && (j == n || !is_word_char(chars[j]) || !is_word_char(chars[j - 1]));

        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if !starts_word(i) {
                i += 1;
                continue;
            }
            let longest = (i + 1..=n.min(i + self.max_chars))
                .rev()
                .filter(|&j| ends_word(j))
                .find_map(|j| {
                    let surface = &text[bytes[i]..bytes[j]];
                    self.entries.get(surface).map(|ty| (j, surface, ty))
                });
            match longest {
                Some((j, surface, ty)) => {
                    out.push(EntityMention {
                        text: surface.to_string(),
                        entity_type: ty.clone(),
                        start: i,
                        end: j,
                    });
                    i = j;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// Question → span text → score table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QaFixture {
    scores: BTreeMap<String, BTreeMap<String, f64>>,
}

impl QaFixture {
    pub fn new(scores: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        Self { scores }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BackendError> {
        let scores: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_slice(bytes)
            .map_err(|e| BackendError::Fixture(format!("qa fixture: {e}")))?;
        for (q, spans) in &scores {
            if let Some((s, v)) = spans.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(BackendError::Fixture(format!(
                    "qa fixture: score {v} for ({q:?}, {s:?}) outside [0, 1]"
                )));
            }
        }
        Ok(Self { scores })
    }

    fn entries_for(&self, question: &str) -> Option<&BTreeMap<String, f64>> {
        self.scores
            .get(question)
            .or_else(|| self.scores.get(WILDCARD_QUESTION))
    }

    pub fn spans(&self, question: &str, context: &str) -> Vec<ScoredSpan> {
        let Some(entries) = self.entries_for(question) else {
            return Vec::new();
        };
        entries
            .iter()
            .filter_map(|(surface, &score)| {
                find_word_bounded(context, surface).map(|(start, end)| ScoredSpan {
                    text: surface.clone(),
                    start,
                    end,
                    score,
                })
            })
            .collect()
    }
}

/// Char offsets of the first occurrence of `needle` in `haystack` that is
/// not glued to surrounding word characters.
fn find_word_bounded(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    let first = needle.chars().next()?;
    let last = needle.chars().next_back()?;
    haystack.match_indices(needle).find_map(|(b, m)| {
        let before = haystack[..b].chars().next_back();
        let after = haystack[b + m.len()..].chars().next();
        let left_ok = !(is_word_char(first) && before.is_some_and(is_word_char));
        let right_ok = !(is_word_char(last) && after.is_some_and(is_word_char));
        (left_ok && right_ok).then(|| {
            let start = haystack[..b].chars().count();
            (start, start + needle.chars().count())
        })
    })
}

#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    lexicon: Lexicon,
    qa: QaFixture,
}

impl StubBackend {
    pub fn new(lexicon: Lexicon, qa: QaFixture) -> Self {
        Self { lexicon, qa }
    }

    /// Load `lexicon.json` and `qa.json` from `dir`. Both files are required.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, BackendError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read(&path).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))
        };
        Ok(Self {
            lexicon: Lexicon::from_json(&read(LEXICON_FILE)?)?,
            qa: QaFixture::from_json(&read(QA_FIXTURE_FILE)?)?,
        })
    }

    pub fn template_question(first_answer: &str) -> String {
        format!("Which entities include {first_answer} in this context?")
    }
}

impl ModelBackend for StubBackend {
    fn summarize(&self, req: &SummarizeRequest<'_>) -> Result<String, BackendError> {
        Ok(leading_sentences(req.text, SENTENCES_IN_SUMMARY).to_string())
    }

    fn tag_entities(&self, req: &NerRequest<'_>) -> Result<Vec<EntityMention>, BackendError> {
        Ok(self.lexicon.tag(req.text))
    }

    fn generate_question(
        &self,
        _req: &QuestionRequest<'_>,
        answers: &[String],
    ) -> Result<String, BackendError> {
        let first = answers
            .first()
            .ok_or_else(|| BackendError::Fixture("question requested for zero answers".into()))?;
        Ok(Self::template_question(first))
    }

    fn qa_spans(&self, req: &QaSpansRequest<'_>) -> Result<Vec<ScoredSpan>, BackendError> {
        Ok(self.qa.spans(req.question, req.context))
    }
}
