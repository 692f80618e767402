//! Synthetic list-question-answering data generation.
//!
//! The crate turns an unlabeled passage corpus into multi-answer QA
//! instances. Each passage is summarized, entities of one type found in the
//! summary become a candidate answer list, a question is generated for the
//! list, and a single-span QA model is used to prune wrong answers and to
//! recover omitted ones. The [`evaluation`] module scores multi-span
//! predictions with micro-averaged exact and partial match.
//!
//! Models are reached through [`gateway::Gateway`], which fronts either the
//! deterministic [`gateway::StubBackend`] or an HTTP inference sidecar.

pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod gateway;
pub mod pipeline;
pub mod refinement;
pub mod text;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use corpus::{load_corpus, sample_passages, Passage, SamplingSpec};
pub use extraction::{extract_candidates, normalize_answer, CandidateAnswerSet};
pub use gateway::{Gateway, GatewayConfig};
pub use pipeline::{run_pipeline, PipelineConfig, QaInstance, RunReport};
pub use refinement::{DraftInstance, RefineParams, ScoredAnswer};

/// Text domain of a corpus. Selects the default threshold and the excluded
/// entity type.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    General,
    Biomedical,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::General => "general",
            Domain::Biomedical => "biomedical",
        }
    }

    /// Default filtering / expansion threshold.
    pub fn default_tau(self) -> f64 {
        match self {
            Domain::General => 0.1,
            Domain::Biomedical => 0.05,
        }
    }

    /// Entity types that produce trivial answer lists in this domain.
    pub fn default_excluded_types(self) -> Vec<String> {
        match self {
            Domain::General => vec!["DATE".to_string()],
            Domain::Biomedical => vec!["species".to_string()],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Domain::General),
            "biomedical" => Ok(Domain::Biomedical),
            other => Err(format!(
                "unknown domain `{other}` (expected general|biomedical)"
            )),
        }
    }
}
