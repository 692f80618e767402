mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use listgen::gateway::protocol::{NerRequest, QaSpansRequest, QuestionRequest, SummarizeRequest};
use listgen::gateway::{
    BackendError, EntityMention, Gateway, GatewayConfig, ModelBackend, ScoredSpan, StubBackend,
};
use listgen::pipeline::{parse_instance, process_passage, run_with_gateway};
use listgen::{Domain, Passage, PipelineConfig, RefineParams};

/// Stub behaviour, except that passages containing `BROKEN` fail to
/// summarize and questions mentioning `Yale` fail in QA.
struct Faulty(StubBackend);

impl ModelBackend for Faulty {
    fn summarize(&self, req: &SummarizeRequest<'_>) -> Result<String, BackendError> {
        if req.text.contains("BROKEN") {
            return Err(BackendError::Status {
                code: 500,
                message: "boom".into(),
            });
        }
        self.0.summarize(req)
    }

    fn tag_entities(&self, req: &NerRequest<'_>) -> Result<Vec<EntityMention>, BackendError> {
        self.0.tag_entities(req)
    }

    fn generate_question(
        &self,
        req: &QuestionRequest<'_>,
        answers: &[String],
    ) -> Result<String, BackendError> {
        self.0.generate_question(req, answers)
    }

    fn qa_spans(&self, req: &QaSpansRequest<'_>) -> Result<Vec<ScoredSpan>, BackendError> {
        if req.question.contains("Yale") {
            return Err(BackendError::Protocol("garbled".into()));
        }
        self.0.qa_spans(req)
    }
}

fn faulty_gateway() -> Gateway {
    let dir = common::fixture_dir("worked_example");
    let config = GatewayConfig {
        stub_fixture_dir: Some(dir.clone()),
        backoff_ms: 0,
        ..GatewayConfig::default()
    };
    Gateway::new(
        Arc::new(Faulty(StubBackend::from_dir(&dir).unwrap())),
        config,
        ["DATE".to_string()],
    )
}

fn passage(id: &str, text: &str) -> Passage {
    Passage {
        id: id.into(),
        text: text.into(),
        source: Domain::General,
    }
}

#[test]
fn gateway_failures_are_counted_not_fatal() {
    let gw = faulty_gateway();
    let excluded = BTreeSet::from(["DATE".to_string()]);
    let params = RefineParams::default();

    let broken = process_passage(
        &passage("x", "BROKEN Rice and Yale."),
        &gw,
        &params,
        &excluded,
    );
    assert!(broken.failed);
    assert_eq!(broken.candidate_sets, 0);

    // the stub question names the first answer, so QA fails for this set
    let qa_fails = process_passage(
        &passage("y", "Yale and Rice met in Houston."),
        &gw,
        &params,
        &excluded,
    );
    assert!(!qa_fails.failed);
    assert_eq!(qa_fails.candidate_sets, 2);
    assert_eq!(qa_fails.discarded.gateway_failed, 1);
    assert_eq!(qa_fails.discarded.too_few_initial, 1);
    assert!(qa_fails.instances.is_empty());
}

#[test]
fn report_conserves_sets_and_output_is_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.jsonl");
    let texts = [
        ("m", "Rice hosted Baylor and Hanszen. Later Yale came."),
        ("b", "BROKEN Rice and Baylor."),
        ("k", "Yale and Rice met in Houston. Baylor too."),
        ("a", "Rice and Baylor, not Hanszen. Yale as well."),
        ("z", "Nothing to see here."),
    ];
    let lines: Vec<String> = texts
        .iter()
        .map(|(id, text)| serde_json::json!({"id": id, "text": text}).to_string())
        .collect();
    fs::write(&corpus, lines.join("\n")).unwrap();

    let gw = faulty_gateway();
    for workers in [1, 2, 8] {
        let out = tmp.path().join(format!("out{workers}.jsonl"));
        let mut config = PipelineConfig::new(Domain::General, &corpus, &out);
        config.sampling.min_words = 1;
        config.workers = workers;
        config.gateway = gw.config().clone();
        let report = run_with_gateway(&config, &gw).unwrap();
        assert!(report.is_conserved(), "{report:?}");
        assert_eq!(report.passages_sampled, 5);
        assert_eq!(report.passages_failed, 1);
        assert_eq!(report.passages_processed, 4);
        assert_eq!(report.discarded.gateway_failed, 1);

        let written = fs::read_to_string(&out).unwrap();
        let keys: Vec<(String, String)> = written
            .lines()
            .map(|l| parse_instance(l).expect("every line is a valid instance"))
            .map(|i| (i.passage_id, i.entity_type))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(keys.len(), report.instances_emitted);
        assert_eq!(
            report.answer_count_histogram.total(),
            report.instances_emitted
        );
    }
}

#[test]
fn unwritable_output_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = common::fixture_dir("worked_example").join("corpus.jsonl");
    let mut config = PipelineConfig::new(
        Domain::General,
        corpus,
        PathBuf::from(tmp.path()).join("no/such/dir/out.jsonl"),
    );
    config.sampling.min_words = 1;
    let gw = faulty_gateway();
    config.gateway = gw.config().clone();
    let err = run_with_gateway(&config, &gw).unwrap_err();
    assert!(err.to_string().contains("out.jsonl"), "{err}");
}
