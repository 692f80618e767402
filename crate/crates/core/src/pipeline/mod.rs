//! End-to-end generation: sample, extract, refine, write.
//!
//! Passages are processed independently on a bounded worker pool. Each
//! passage yields its finalized instances and its discard tallies; results
//! are merged after the pool drains, instances are sorted by
//! `(passage_id, entity_type)`, and a single writer emits the JSONL file.
//!
//! Every entity-type group found in a summary counts as one candidate set,
//! and every candidate set ends up either emitted or in exactly one discard
//! category of [`RunReport`].

pub mod dataset;
pub mod export;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_corpus, sample_passages, CorpusError, Passage, SamplingSpec};
use crate::extraction::extract;
use crate::gateway::{Gateway, GatewayConfig, GatewayError};
use crate::refinement::{
    expand_answers, finalize_instance, refine_iteratively, DiscardReason, RefineParams, Stage,
    StageError,
};
use crate::Domain;

pub use dataset::{
    parse_dataset, parse_instance, serialize_instance, Answer, Provenance, QaInstance,
};
pub use export::export_multispan;
pub use stats::{compute_stats, AnswerCountHistogram, StatsReport};

pub const STAGES: [&str; 7] = [
    "load",
    "sample",
    "extraction",
    "filtering",
    "expansion",
    "finalization",
    "write",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    pub domain: Domain,
    pub sampling: SamplingSpec,
    pub refine: RefineParams,
    pub excluded_types: BTreeSet<String>,
    pub gateway: GatewayConfig,
    pub workers: usize,
    pub output_path: PathBuf,
}

impl PipelineConfig {
    /// Domain defaults for threshold and excluded types; stub backend.
    pub fn new(
        domain: Domain,
        corpus_path: impl Into<PathBuf>,
        output_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            corpus_path: corpus_path.into(),
            domain,
            sampling: SamplingSpec::default(),
            refine: RefineParams::for_domain(domain),
            excluded_types: domain.default_excluded_types().into_iter().collect(),
            gateway: GatewayConfig::default(),
            workers: 4,
            output_path: output_path.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        self.sampling.validate()?;
        self.refine.validate().map_err(PipelineError::Config)?;
        self.gateway.validate().map_err(PipelineError::Config)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardCounts {
    pub too_few_initial: usize,
    pub filtered_out: usize,
    pub unlocalizable: usize,
    /// Candidate sets abandoned after a gateway call failed.
    pub gateway_failed: usize,
}

impl DiscardCounts {
    pub fn total(&self) -> usize {
        self.too_few_initial + self.filtered_out + self.unlocalizable + self.gateway_failed
    }

    fn record(&mut self, reason: DiscardReason) {
        match reason {
            DiscardReason::TooFewInitial => self.too_few_initial += 1,
            DiscardReason::FilteredOut => self.filtered_out += 1,
            DiscardReason::Unlocalizable => self.unlocalizable += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.too_few_initial += other.too_few_initial;
        self.filtered_out += other.filtered_out;
        self.unlocalizable += other.unlocalizable;
        self.gateway_failed += other.gateway_failed;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub passages_sampled: usize,
    pub passages_processed: usize,
    /// Passages whose summary or entity tagging failed.
    pub passages_failed: usize,
    pub candidate_sets: usize,
    pub instances_emitted: usize,
    pub discarded: DiscardCounts,
    /// Seconds per stage. Per-passage stages are summed over workers.
    pub stage_timings: BTreeMap<String, f64>,
    pub answer_count_histogram: AnswerCountHistogram,
}

impl RunReport {
    pub fn is_conserved(&self) -> bool {
        self.instances_emitted + self.discarded.total() == self.candidate_sets
    }

    /// The report with timings removed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self {
            stage_timings: BTreeMap::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Default)]
struct StageClock {
    extraction: Duration,
    filtering: Duration,
    expansion: Duration,
    finalization: Duration,
}

impl StageClock {
    fn merge(&mut self, other: &Self) {
        self.extraction += other.extraction;
        self.filtering += other.filtering;
        self.expansion += other.expansion;
        self.finalization += other.finalization;
    }
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// What one passage contributed to the run.
#[derive(Debug, Default)]
pub struct PassageOutcome {
    pub instances: Vec<QaInstance>,
    pub candidate_sets: usize,
    pub discarded: DiscardCounts,
    /// Extraction failed, so no candidate sets were produced.
    pub failed: bool,
    clock: StageClock,
}

fn refine_set(
    passage: &Passage,
    set: &crate::extraction::CandidateAnswerSet,
    params: &RefineParams,
    gateway: &Gateway,
    clock: &mut StageClock,
) -> Result<crate::refinement::DraftInstance, StageError> {
    let filtered = timed(&mut clock.filtering, || {
        refine_iteratively(passage, set, params, gateway)
    })?;
    if filtered.stage == Stage::Discarded {
        return Ok(filtered);
    }
    let expanded = timed(&mut clock.expansion, || {
        expand_answers(passage, &filtered, params, gateway)
    })?;
    timed(&mut clock.finalization, || {
        finalize_instance(passage, &expanded, params, gateway)
    })
}

pub fn process_passage(
    passage: &Passage,
    gateway: &Gateway,
    params: &RefineParams,
    excluded_types: &BTreeSet<String>,
) -> PassageOutcome {
    let mut out = PassageOutcome::default();
    let extraction = match timed(&mut out.clock.extraction, || {
        extract(passage, gateway, excluded_types)
    }) {
        Ok(x) => x,
        Err(e) => {
            log::warn!("{e}; passage skipped");
            out.failed = true;
            return out;
        }
    };
    out.candidate_sets = extraction.sets.len() + extraction.undersized_groups;
    out.discarded.too_few_initial += extraction.undersized_groups;

    for set in &extraction.sets {
        match refine_set(passage, set, params, gateway, &mut out.clock) {
            Ok(draft) if draft.stage == Stage::Finalized => {
                let truncated = gateway.qa_truncates(&draft.question, &passage.text);
                match QaInstance::from_draft(&draft, passage, &extraction.summary.text, truncated) {
                    Some(inst) => out.instances.push(inst),
                    None => out.discarded.record(DiscardReason::Unlocalizable),
                }
            }
            Ok(draft) => out
                .discarded
                .record(draft.discard_reason.unwrap_or(DiscardReason::FilteredOut)),
            Err(e) => {
                log::warn!("{e}; candidate set {} skipped", set.entity_type);
                out.discarded.gateway_failed += 1;
            }
        }
    }
    out
}

fn write_dataset(path: &Path, instances: &[QaInstance]) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for inst in instances {
        writeln!(out, "{}", serialize_instance(inst)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Run over an already constructed gateway.
pub fn run_with_gateway(
    config: &PipelineConfig,
    gateway: &Gateway,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let mut timings = BTreeMap::new();
    let mut clock = |name: &str, started: Instant| {
        timings.insert(name.to_string(), started.elapsed().as_secs_f64());
    };

    let started = Instant::now();
    let corpus = load_corpus(&config.corpus_path)?;
    clock("load", started);

    let started = Instant::now();
    let passages = sample_passages(&corpus.passages, &config.sampling)?;
    clock("sample", started);
    log::info!(
        "sampled {} of {} passages",
        passages.len(),
        corpus.passages.len()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let outcomes: Vec<PassageOutcome> = pool.install(|| {
        passages
            .par_iter()
            .map(|p| process_passage(p, gateway, &config.refine, &config.excluded_types))
            .collect()
    });

    let mut report = RunReport {
        passages_sampled: passages.len(),
        passages_processed: 0,
        passages_failed: 0,
        candidate_sets: 0,
        instances_emitted: 0,
        discarded: DiscardCounts::default(),
        stage_timings: BTreeMap::new(),
        answer_count_histogram: AnswerCountHistogram::default(),
    };
    let mut stage_clock = StageClock::default();
    let mut instances = Vec::new();
    for outcome in outcomes {
        if outcome.failed {
            report.passages_failed += 1;
        } else {
            report.passages_processed += 1;
        }
        report.candidate_sets += outcome.candidate_sets;
        report.discarded.merge(&outcome.discarded);
        stage_clock.merge(&outcome.clock);
        instances.extend(outcome.instances);
    }
    instances.sort_by(|a, b| (&a.passage_id, &a.entity_type).cmp(&(&b.passage_id, &b.entity_type)));
    for inst in &instances {
        report.answer_count_histogram.add(inst.answers.len());
    }
    report.instances_emitted = instances.len();

    let started = Instant::now();
    write_dataset(&config.output_path, &instances)?;
    clock("write", started);

    for (name, d) in [
        ("extraction", stage_clock.extraction),
        ("filtering", stage_clock.filtering),
        ("expansion", stage_clock.expansion),
        ("finalization", stage_clock.finalization),
    ] {
        timings.insert(name.to_string(), d.as_secs_f64());
    }
    report.stage_timings = timings;
    debug_assert!(report.is_conserved(), "{report:?}");
    Ok(report)
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let gateway = Gateway::from_config(
        config.gateway.clone(),
        config.excluded_types.iter().cloned(),
    )?;
    run_with_gateway(config, &gateway)
}
