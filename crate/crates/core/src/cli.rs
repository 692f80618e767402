//! Command-line interface.
//!
//! Exit status is 0 on success, 1 on runtime failure and 2 on usage errors.
//! Results go to stdout as JSON; diagnostics go to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::evaluation::{evaluate, MatchMode};
use crate::gateway::{health, BackendKind, GatewayConfig};
use crate::pipeline::{compute_stats, export_multispan, run_pipeline, PipelineConfig};
use crate::Domain;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "listgen",
    version,
    about = "Generate and evaluate list question answering data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a QA dataset from a passage corpus.
    Generate(GenerateArgs),
    /// Score multi-span predictions against gold answers.
    Evaluate(EvaluateArgs),
    /// Answer-count histogram of a dataset.
    Stats(DataArgs),
    /// Write a dataset as BIO-tagged token sequences.
    Export(ExportArgs),
    /// Query the inference sidecar's health endpoint.
    Health(HealthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Stub,
    Remote,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Stub => BackendKind::Stub,
            BackendArg::Remote => BackendKind::Remote,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSONL corpus of {"id", "text"} records.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<Domain>,
    /// Output dataset path (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Passages to sample [default: 1000]
    #[arg(long)]
    pub num_passages: Option<usize>,
    /// Confidence threshold [default: 0.1 general, 0.05 biomedical]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Maximum filter passes [default: 3]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Sampling seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: 4]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Model backend [default: remote]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Sidecar base URL.
    #[arg(long, env = "LIQUID_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Directory holding the stub backend's lexicon.json and qa.json.
    #[arg(long)]
    pub stub_dir: Option<PathBuf>,
    /// Minimum passage length in words [default: 50]
    #[arg(long)]
    pub min_words: Option<usize>,
    /// Maximum passage length in words [default: 600]
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Expansion admits only spans scoring strictly above the weakest answer.
    #[arg(long)]
    pub strict_expansion_floor: bool,
    /// QA spans requested per call [default: 20]
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON object mapping question id to gold answers.
    #[arg(long)]
    pub gold: PathBuf,
    /// JSON object mapping question id to predicted answers.
    #[arg(long)]
    pub pred: PathBuf,
    /// Partial match uses the longest common substring.
    #[arg(long)]
    pub substring_mode: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset JSONL file.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HealthArgs {
    #[arg(long, env = "LIQUID_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, value_enum, default_value = "remote")]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 10)]
    pub timeout_secs: u64,
}

/// Options accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub domain: Option<Domain>,
    pub out: Option<PathBuf>,
    pub num_passages: Option<usize>,
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub backend: Option<BackendArg>,
    pub endpoint: Option<String>,
    pub stub_dir: Option<PathBuf>,
    pub min_words: Option<usize>,
    pub max_words: Option<usize>,
    pub strict_expansion_floor: Option<bool>,
    pub top_k: Option<usize>,
    pub excluded_types: Option<Vec<String>>,
    pub gateway: Option<GatewayConfig>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn missing(flag: &str) -> Failure {
    Failure::Usage(format!("missing required option --{flag}"))
}

/// Merge the config file and flags into a pipeline configuration.
pub fn build_config(args: &GenerateArgs) -> Result<PipelineConfig, String> {
    let file: ConfigFile = match &args.config {
        Some(path) => {
            let raw = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&raw)
                .map_err(|e| format!("invalid config {}: {e}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let corpus = args
        .corpus
        .clone()
        .or(file.corpus)
        .ok_or("missing required option --corpus")?;
    let domain = args
        .domain
        .or(file.domain)
        .ok_or("missing required option --domain")?;
    let out = args
        .out
        .clone()
        .or(file.out)
        .ok_or("missing required option --out")?;

    let mut config = PipelineConfig::new(domain, corpus, out);
    if let Some(gateway) = file.gateway {
        config.gateway = gateway;
    }
    if let Some(types) = file.excluded_types {
        config.excluded_types = types.into_iter().collect();
    }
    let s = &mut config.sampling;
    s.count = args.num_passages.or(file.num_passages).unwrap_or(s.count);
    s.seed = args.seed.or(file.seed).unwrap_or(s.seed);
    s.min_words = args.min_words.or(file.min_words).unwrap_or(s.min_words);
    s.max_words = args.max_words.or(file.max_words).unwrap_or(s.max_words);
    let r = &mut config.refine;
    r.tau = args.tau.or(file.tau).unwrap_or(r.tau);
    r.max_iters = args.max_iters.or(file.max_iters).unwrap_or(r.max_iters);
    r.strict_expansion_floor =
        args.strict_expansion_floor || file.strict_expansion_floor.unwrap_or(false);
    config.workers = args.workers.or(file.workers).unwrap_or(config.workers);

    let g = &mut config.gateway;
    g.backend = args
        .backend
        .or(file.backend)
        .map(BackendKind::from)
        .unwrap_or(BackendKind::Remote);
    g.endpoint_url = args
        .endpoint
        .clone()
        .or(file.endpoint)
        .or(g.endpoint_url.take());
    g.stub_fixture_dir = args
        .stub_dir
        .clone()
        .or(file.stub_dir)
        .or(g.stub_fixture_dir.take());
    g.top_k = args.top_k.or(file.top_k).unwrap_or(g.top_k);

    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let config = build_config(args).map_err(Failure::Usage)?;
    let report = run_pipeline(&config).context("generation failed")?;
    log::info!(
        "{} instances from {} candidate sets written to {}",
        report.instances_emitted,
        report.candidate_sets,
        config.output_path.display()
    );
    print_json(&report)?;
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), Failure> {
    let mode = if args.substring_mode {
        MatchMode::Substring
    } else {
        MatchMode::Subsequence
    };
    let scores = evaluate(&args.gold, &args.pred, mode).context("evaluation failed")?;
    println!("{}", scores.to_json());
    Ok(())
}

fn stats(args: &DataArgs) -> Result<(), Failure> {
    let report = compute_stats(&args.data)?;
    print_json(&report)?;
    Ok(())
}

fn export(args: &ExportArgs) -> Result<(), Failure> {
    let count = export_multispan(&args.data, &args.out)?;
    print_json(&serde_json::json!({ "exported": count, "out": args.out }))?;
    Ok(())
}

fn health_cmd(args: &HealthArgs) -> Result<(), Failure> {
    if args.backend == BackendArg::Stub {
        return Err(Failure::Usage(
            "the stub backend has no endpoint to check".into(),
        ));
    }
    let endpoint = args
        .endpoint
        .as_deref()
        .ok_or_else(|| missing("endpoint"))?;
    let status = health(endpoint, Duration::from_secs(args.timeout_secs))
        .with_context(|| format!("health check against {endpoint} failed"))?;
    print_json(&status)?;
    Ok(())
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Stats(a) => stats(a),
        Command::Export(a) => export(a),
        Command::Health(a) => health_cmd(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let mut cmd = Cli::command();
            let name = match &cli.command {
                Command::Generate(_) => "generate",
                Command::Evaluate(_) => "evaluate",
                Command::Stats(_) => "stats",
                Command::Export(_) => "export",
                Command::Health(_) => "health",
            };
            let usage = cmd
                .find_subcommand_mut(name)
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

impl From<crate::pipeline::PipelineError> for Failure {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        Failure::Runtime(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generate_args(extra: &[&str]) -> GenerateArgs {
        let mut argv = vec!["listgen", "generate"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Generate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn domain_defaults_apply() {
        let a = generate_args(&[
            "--corpus",
            "c",
            "--domain",
            "biomedical",
            "--out",
            "o",
            "--backend",
            "stub",
            "--stub-dir",
            "s",
        ]);
        let c = build_config(&a).unwrap();
        assert_eq!(c.refine.tau, 0.05);
        assert_eq!(c.refine.max_iters, 3);
        assert!(c.excluded_types.contains("species"));
        assert_eq!(c.sampling.count, 1000);
        assert_eq!(c.sampling.seed, 42);
        assert_eq!(c.workers, 4);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"corpus":"from_file","domain":"general","out":"o","tau":0.3,"seed":7,"backend":"stub","stub_dir":"s"}"#,
        )
        .unwrap();
        let a = generate_args(&["--config", path.to_str().unwrap(), "--seed", "9"]);
        let c = build_config(&a).unwrap();
        assert_eq!(c.corpus_path, PathBuf::from("from_file"));
        assert_eq!(c.refine.tau, 0.3);
        assert_eq!(c.sampling.seed, 9);
    }

    #[test]
    fn usage_errors() {
        let a = generate_args(&["--domain", "general", "--out", "o"]);
        assert!(build_config(&a).unwrap_err().contains("--corpus"));
        let a = generate_args(&[
            "--corpus",
            "c",
            "--domain",
            "general",
            "--out",
            "o",
            "--backend",
            "stub",
        ]);
        assert!(build_config(&a).unwrap_err().contains("fixture directory"));
        let a = generate_args(&[
            "--corpus",
            "c",
            "--domain",
            "general",
            "--out",
            "o",
            "--backend",
            "stub",
            "--stub-dir",
            "s",
            "--tau",
            "1.5",
        ]);
        assert!(build_config(&a).unwrap_err().contains("tau"));
    }

    #[test]
    fn bad_domain_is_a_parse_error() {
        let err = Cli::try_parse_from(["listgen", "generate", "--domain", "legal"]).unwrap_err();
        assert!(err.use_stderr());
    }
}
