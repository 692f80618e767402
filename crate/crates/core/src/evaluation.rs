//! Micro-averaged precision, recall and F1 for multi-span answers.
//!
//! Given gold answer sets `G_n` and predicted sets `P_n` for questions
//! `n = 1..N` and a scoring function `f(x, Y)`:
//!
//! ```text
//! P  = Σ_n Σ_{p ∈ P_n} f(p, G_n) / Σ_n |P_n|
//! R  = Σ_n Σ_{g ∈ G_n} f(g, P_n) / Σ_n |G_n|
//! F1 = 2PR / (P + R)
//! ```
//!
//! Exact match scores `f(x, Y) = 1[x ∈ Y]` over raw strings. Partial match
//! scores `f(x, Y) = max_y lcs(x, y) / len(x)` with character-level longest
//! common subsequence (or, in [`MatchMode::Substring`], longest common
//! contiguous substring).
//!
//! Empty denominators: when `Σ|P_n| = 0` (resp. `Σ|G_n| = 0`) precision
//! (resp. recall) is 1.0 if every gold and every predicted set is empty and
//! 0.0 otherwise. F1 is 0.0 when `P + R = 0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub type AnswerSets = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction ids not present in gold: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("partial match is undefined for an empty answer string")]
    EmptyAnswer,
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalInput {
    gold: AnswerSets,
    predictions: AnswerSets,
}

impl EvalInput {
    /// Fails when a prediction id has no gold entry. Gold questions without
    /// predictions count as empty prediction sets.
    pub fn new(gold: AnswerSets, predictions: AnswerSets) -> Result<Self, EvalError> {
        let unknown: Vec<String> = predictions
            .keys()
            .filter(|id| !gold.contains_key(*id))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(EvalError::UnknownIds(unknown));
        }
        Ok(Self { gold, predictions })
    }

    pub fn gold(&self) -> &AnswerSets {
        &self.gold
    }

    pub fn predictions(&self) -> &AnswerSets {
        &self.predictions
    }

    /// (gold, predicted) pairs for every gold question.
    pub fn pairs(&self) -> impl Iterator<Item = (&BTreeSet<String>, &BTreeSet<String>)> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        self.gold
            .iter()
            .map(|(id, g)| (g, self.predictions.get(id).unwrap_or(&EMPTY)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalScores {
    pub exact: Prf,
    pub partial: Prf,
}

impl EvalScores {
    /// JSON with every score printed to four decimal places.
    pub fn to_json(&self) -> String {
        let prf = |p: &Prf| {
            format!(
                "{{\"precision\": {:.4}, \"recall\": {:.4}, \"f1\": {:.4}}}",
                p.precision, p.recall, p.f1
            )
        };
        format!(
            "{{\"exact\": {}, \"partial\": {}}}",
            prf(&self.exact),
            prf(&self.partial)
        )
    }
}

pub fn exact_score(x: &str, ys: &BTreeSet<String>) -> f64 {
    if ys.contains(x) {
        1.0
    } else {
        0.0
    }
}

/// Character-level longest common subsequence length.
pub fn lcs_length(x: &str, y: &str) -> usize {
    let a: Vec<char> = x.chars().collect();
    let b: Vec<char> = y.chars().collect();
    let (long, short) = if a.len() >= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    let mut row = vec![0usize; short.len() + 1];
    for &c in long.iter() {
        let mut diag = 0;
        for j in 1..=short.len() {
            let above = row[j];
            row[j] = if c == short[j - 1] {
                diag + 1
            } else {
                row[j].max(row[j - 1])
            };
            diag = above;
        }
    }
    row[short.len()]
}

/// Character-level longest common contiguous substring length.
pub fn longest_common_substring(x: &str, y: &str) -> usize {
    let a: Vec<char> = x.chars().collect();
    let b: Vec<char> = y.chars().collect();
    let mut row = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &c in &a {
        for j in (1..=b.len()).rev() {
            row[j] = if c == b[j - 1] { row[j - 1] + 1 } else { 0 };
            best = best.max(row[j]);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    #[default]
    Subsequence,
    Substring,
}

pub fn partial_score_with(
    x: &str,
    ys: &BTreeSet<String>,
    mode: MatchMode,
) -> Result<f64, EvalError> {
    let len = x.chars().count();
    if len == 0 {
        return Err(EvalError::EmptyAnswer);
    }
    let overlap = |y: &String| match mode {
        MatchMode::Subsequence => lcs_length(x, y),
        MatchMode::Substring => longest_common_substring(x, y),
    };
    Ok(ys
        .iter()
        .map(overlap)
        .max()
        .map_or(0.0, |g| g as f64 / len as f64))
}

pub fn partial_score(x: &str, ys: &BTreeSet<String>) -> Result<f64, EvalError> {
    partial_score_with(x, ys, MatchMode::Subsequence)
}

/// Per-answer scoring function `f(x, Y)`.
pub trait Scorer {
    fn score(&self, x: &str, ys: &BTreeSet<String>) -> Result<f64, EvalError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl Scorer for ExactMatch {
    fn score(&self, x: &str, ys: &BTreeSet<String>) -> Result<f64, EvalError> {
        Ok(exact_score(x, ys))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PartialMatch(pub MatchMode);

impl Scorer for PartialMatch {
    fn score(&self, x: &str, ys: &BTreeSet<String>) -> Result<f64, EvalError> {
        partial_score_with(x, ys, self.0)
    }
}

pub fn micro_metrics(input: &EvalInput, scorer: &impl Scorer) -> Result<Prf, EvalError> {
    let (mut p_num, mut p_den, mut r_num, mut r_den) = (0.0, 0usize, 0.0, 0usize);
    for (gold, pred) in input.pairs() {
        for a in pred {
            p_num += scorer.score(a, gold)?;
        }
        for a in gold {
            r_num += scorer.score(a, pred)?;
        }
        p_den += pred.len();
        r_den += gold.len();
    }
    let all_empty = p_den == 0 && r_den == 0;
    let ratio = |num: f64, den: usize| {
        if den > 0 {
            num / den as f64
        } else if all_empty {
            1.0
        } else {
            0.0
        }
    };
    Ok(Prf::new(ratio(p_num, p_den), ratio(r_num, r_den)))
}

pub fn score_all(input: &EvalInput, mode: MatchMode) -> Result<EvalScores, EvalError> {
    Ok(EvalScores {
        exact: micro_metrics(input, &ExactMatch)?,
        partial: micro_metrics(input, &PartialMatch(mode))?,
    })
}

/// Parse a `{"question id": ["answer", ...]}` document. Duplicate answers in
/// one list are collapsed; the number collapsed is returned alongside.
pub fn parse_answer_map(bytes: &[u8]) -> Result<(AnswerSets, usize), EvalError> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_slice(bytes).map_err(|e| EvalError::Parse {
            what: "answer map".into(),
            message: e.to_string(),
        })?;
    let mut duplicates = 0;
    let sets = raw
        .into_iter()
        .map(|(id, answers)| {
            let n = answers.len();
            let set: BTreeSet<String> = answers.into_iter().collect();
            duplicates += n - set.len();
            (id, set)
        })
        .collect();
    Ok((sets, duplicates))
}

fn read_answer_file(path: &Path) -> Result<AnswerSets, EvalError> {
    let bytes = fs::read(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (sets, duplicates) = parse_answer_map(&bytes).map_err(|e| match e {
        EvalError::Parse { message, .. } => EvalError::Parse {
            what: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    if duplicates > 0 {
        log::warn!(
            "{}: removed {duplicates} duplicate answer(s)",
            path.display()
        );
    }
    Ok(sets)
}

pub fn evaluate(
    gold_path: impl AsRef<Path>,
    pred_path: impl AsRef<Path>,
    mode: MatchMode,
) -> Result<EvalScores, EvalError> {
    let gold = read_answer_file(gold_path.as_ref())?;
    let pred = read_answer_file(pred_path.as_ref())?;
    score_all(&EvalInput::new(gold, pred)?, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn input(gold: &[(&str, &[&str])], pred: &[(&str, &[&str])]) -> EvalInput {
        let conv =
            |xs: &[(&str, &[&str])]| xs.iter().map(|(k, v)| (k.to_string(), set(v))).collect();
        EvalInput::new(conv(gold), conv(pred)).unwrap()
    }

    /// Enumerate every subsequence of the shorter string and keep the longest
    /// that is also a subsequence of the other.
    fn brute_lcs(x: &str, y: &str) -> usize {
        let (s, t): (Vec<char>, Vec<char>) = if x.chars().count() <= y.chars().count() {
            (x.chars().collect(), y.chars().collect())
        } else {
            (y.chars().collect(), x.chars().collect())
        };
        let is_subseq = |cand: &[char]| {
            let mut it = t.iter();
            cand.iter().all(|c| it.any(|d| d == c))
        };
        (0u32..1 << s.len())
            .filter_map(|mask| {
                let cand: Vec<char> = (0..s.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| s[i])
                    .collect();
                is_subseq(&cand).then_some(cand.len())
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn exact_membership() {
        assert_eq!(exact_score("BBC", &set(&["BBC", "Yahoo"])), 1.0);
        assert_eq!(exact_score("bbc", &set(&["BBC"])), 0.0);
        assert_eq!(exact_score("x", &set(&[])), 0.0);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(brute_lcs("ABCBDAB", "BDCABA"), 4);
        assert_eq!(lcs_length("ABCBDAB", "BDCABA"), 4);
        assert_eq!(lcs_length("Cordon Bleu", "Cordon Bleu"), 11);
        assert_eq!(lcs_length("abc", ""), 0);
        assert_eq!(lcs_length("", ""), 0);
        assert_eq!(lcs_length("a_b_c", "abc"), 3);
        assert_eq!(longest_common_substring("a_b_c", "abc"), 1);
        assert_eq!(
            longest_common_substring("Le Cordon Bleu", "Cordon Bleu"),
            11
        );
    }

    #[test]
    fn partial_examples() {
        assert_eq!(
            partial_score("Cordon Bleu", &set(&["Le Cordon Bleu"])).unwrap(),
            1.0
        );
        let v = partial_score("Le Cordon Bleu", &set(&["Cordon Bleu"])).unwrap();
        assert!((v - 11.0 / 14.0).abs() < 1e-12);
        assert_eq!(partial_score("Yale", &set(&["Yale", "Rice"])).unwrap(), 1.0);
        assert_eq!(partial_score("Yale", &set(&[])).unwrap(), 0.0);
        assert_eq!(partial_score("", &set(&["a"])), Err(EvalError::EmptyAnswer));
    }

    #[test]
    fn perfect_and_half_matches() {
        let i = input(&[("q1", &["BBC", "Yahoo"])], &[("q1", &["BBC", "Yahoo"])]);
        assert_eq!(micro_metrics(&i, &ExactMatch).unwrap(), Prf::new(1.0, 1.0));

        // P = (1 + 0) / 2, R = (1 + 0) / 2
        let i = input(&[("q1", &["BBC", "Yahoo"])], &[("q1", &["BBC", "Google"])]);
        let m = micro_metrics(&i, &ExactMatch).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn partial_micro_example() {
        // P = f("Cordon Bleu", G) / 1 = 11/11
        // R = (f("Le Cordon Bleu", P) + f("Le Notre", P)) / 2
        //   = (11/14 + lcs("Le Notre", "Cordon Bleu")/8) / 2
        // lcs("Le Notre", "Cordon Bleu") = 3, e.g. "ore"
        let i = input(
            &[("q1", &["Le Cordon Bleu", "Le Notre"])],
            &[("q1", &["Cordon Bleu"])],
        );
        let m = micro_metrics(&i, &PartialMatch::default()).unwrap();
        let g2 = brute_lcs("Le Notre", "Cordon Bleu") as f64 / 8.0;
        assert_eq!(g2, 3.0 / 8.0);
        assert_eq!(m.precision, 1.0);
        assert!((m.recall - (11.0 / 14.0 + g2) / 2.0).abs() < 1e-12);
        let e = micro_metrics(&i, &ExactMatch).unwrap();
        assert_eq!((e.precision, e.recall, e.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_conventions() {
        let i = input(&[("q1", &[])], &[]);
        assert_eq!(micro_metrics(&i, &ExactMatch).unwrap(), Prf::new(1.0, 1.0));
        let i = input(&[("q1", &["a"])], &[]);
        let m = micro_metrics(&i, &ExactMatch).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let i = input(&[("q1", &[])], &[("q1", &["a"])]);
        let m = micro_metrics(&i, &ExactMatch).unwrap();
        assert_eq!((m.precision, m.recall), (0.0, 0.0));
    }

    #[test]
    fn unknown_prediction_ids_rejected() {
        let gold: AnswerSets = [("q1".to_string(), set(&["a"]))].into();
        let pred: AnswerSets = [
            ("q9".to_string(), set(&["a"])),
            ("q8".to_string(), set(&[])),
        ]
        .into();
        let err = EvalInput::new(gold, pred).unwrap_err();
        assert_eq!(err, EvalError::UnknownIds(vec!["q8".into(), "q9".into()]));
        assert!(err.to_string().contains("q9"));
    }

    #[test]
    fn answer_map_parsing() {
        let (sets, dups) = parse_answer_map(br#"{"q1": ["a", "b", "a"], "q2": []}"#).unwrap();
        assert_eq!(dups, 1);
        assert_eq!(sets["q1"], set(&["a", "b"]));
        assert!(sets["q2"].is_empty());
        assert!(parse_answer_map(br#"{"q1": "a"}"#).is_err());
    }

    #[test]
    fn json_has_four_decimals() {
        let s = EvalScores {
            exact: Prf::new(0.5, 0.5),
            partial: Prf::new(1.0, 11.0 / 14.0),
        };
        let json = s.to_json();
        assert!(json.contains("\"precision\": 0.5000"));
        assert!(json.contains("\"recall\": 0.7857"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["exact"]["f1"], 0.5);
    }

    fn answer_sets() -> impl Strategy<Value = AnswerSets> {
        proptest::collection::btree_map(
            "q[0-5]",
            proptest::collection::btree_set("[ab c]{1,6}", 0..4),
            0..5,
        )
    }

    proptest! {
        #[test]
        fn lcs_matches_enumeration(x in "[abc]{0,8}", y in "[abc]{0,8}") {
            prop_assert_eq!(lcs_length(&x, &y), brute_lcs(&x, &y));
        }

        #[test]
        fn swap_exchanges_precision_and_recall(g in answer_sets(), p in answer_sets()) {
            let p: AnswerSets = p.into_iter().filter(|(k, _)| g.contains_key(k)).collect();
            // make both maps cover the same ids so swapping stays valid
            let mut p_full = p.clone();
            for k in g.keys() { p_full.entry(k.clone()).or_default(); }
            let a = EvalInput::new(g.clone(), p_full.clone()).unwrap();
            let b = EvalInput::new(p_full, g).unwrap();
            for mode in [MatchMode::Subsequence, MatchMode::Substring] {
                let sa = score_all(&a, mode).unwrap();
                let sb = score_all(&b, mode).unwrap();
                prop_assert!((sa.exact.precision - sb.exact.recall).abs() < 1e-12);
                prop_assert!((sa.partial.precision - sb.partial.recall).abs() < 1e-12);
                prop_assert!((sa.partial.recall - sb.partial.precision).abs() < 1e-12);
            }
        }

        #[test]
        fn exact_never_exceeds_partial(g in answer_sets(), p in answer_sets()) {
            let p: AnswerSets = p.into_iter().filter(|(k, _)| g.contains_key(k)).collect();
            let s = score_all(&EvalInput::new(g, p).unwrap(), MatchMode::Subsequence).unwrap();
            for v in [s.exact.precision, s.exact.recall, s.exact.f1, s.partial.precision, s.partial.recall, s.partial.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(s.exact.precision <= s.partial.precision + 1e-12);
            prop_assert!(s.exact.recall <= s.partial.recall + 1e-12);
            prop_assert!(s.exact.f1 <= s.partial.f1 + 1e-12);
        }

        #[test]
        fn adding_a_gold_answer_as_prediction(g in answer_sets(), p in answer_sets()) {
            let mut p: AnswerSets = p.into_iter().filter(|(k, _)| g.contains_key(k)).collect();
            let Some((qid, answer)) = g.iter().find_map(|(k, v)| v.iter().next().map(|a| (k.clone(), a.clone()))) else {
                return Ok(());
            };
            let before = score_all(&EvalInput::new(g.clone(), p.clone()).unwrap(), MatchMode::Subsequence).unwrap();
            let was_unmatched = !p.get(&qid).is_some_and(|s| s.contains(&answer));
            p.entry(qid).or_default().insert(answer);
            let after = score_all(&EvalInput::new(g, p).unwrap(), MatchMode::Subsequence).unwrap();
            prop_assert!(after.exact.recall + 1e-12 >= before.exact.recall);
            prop_assert!(after.partial.recall + 1e-12 >= before.partial.recall);
            if was_unmatched {
                prop_assert!(after.exact.precision + 1e-12 >= before.exact.precision);
            }
        }
    }
}
