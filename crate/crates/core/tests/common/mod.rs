#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use listgen::gateway::protocol::{NerRequest, QaSpansRequest, SummarizeRequest};
use listgen::gateway::{ModelBackend, StubBackend};
use listgen::Domain;
use serde_json::{json, Value};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub body: String,
}

type Handler = dyn Fn(&Recorded) -> (u16, String) + Send + Sync;

/// Local HTTP server standing in for the inference sidecar.
pub struct MockSidecar {
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
    pub log: Arc<Mutex<Vec<Recorded>>>,
    pub url: String,
}

impl MockSidecar {
    pub fn start(handler: impl Fn(&Recorded) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind mock sidecar"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let (server, log) = (server.clone(), log.clone());
            std::thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let mut body = String::new();
                    let _ = req.as_reader().read_to_string(&mut body);
                    let rec = Recorded {
                        method: req.method().to_string(),
                        path: req.url().to_string(),
                        body,
                    };
                    let (code, reply) = handler(&rec);
                    log.lock().unwrap().push(rec);
                    let header =
                        tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                    let resp = tiny_http::Response::from_string(reply)
                        .with_status_code(code)
                        .with_header(header);
                    let _ = req.respond(resp);
                }
            })
        };
        Self {
            server,
            thread: Some(thread),
            log,
            url: format!("http://127.0.0.1:{port}"),
        }
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.log.lock().unwrap().clone()
    }
}

impl Drop for MockSidecar {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serve the wire protocol from a stub fixture directory.
pub fn fixture_handler(dir: &Path) -> impl Fn(&Recorded) -> (u16, String) + Send + Sync + 'static {
    let stub = StubBackend::from_dir(dir).expect("fixtures load");
    move |rec| {
        let body: Value = serde_json::from_str(&rec.body).unwrap_or(Value::Null);
        let s = |k: &str| body[k].as_str().unwrap_or_default().to_string();
        let n = |k: &str| body[k].as_u64().unwrap_or_default() as usize;
        let reply = match (rec.method.as_str(), rec.path.as_str()) {
            ("GET", "/v1/health") => json!({"status": "ok", "models": ["sum", "ner", "qg", "qa"]}),
            ("POST", "/v1/summarize") => {
                let text = s("text");
                let req = SummarizeRequest {
                    text: &text,
                    min_len: n("min_len"),
                    max_len: n("max_len"),
                };
                json!({"summary": stub.summarize(&req).unwrap()})
            }
            ("POST", "/v1/ner") => {
                let text = s("text");
                let domain: Domain = s("domain").parse().unwrap();
                let entities: Vec<Value> = stub
                    .tag_entities(&NerRequest { text: &text, domain })
                    .unwrap()
                    .into_iter()
                    .map(|e| json!({"text": e.text, "type": e.entity_type, "start": e.start, "end": e.end}))
                    .collect();
                json!({"entities": entities})
            }
            ("POST", "/v1/question") => {
                let input = s("input");
                let answers = input.strip_prefix("answer: ").unwrap_or(&input);
                let first = answers.split(", ").next().unwrap_or_default();
                let first = first.split(" context: ").next().unwrap_or_default();
                json!({"question": StubBackend::template_question(first)})
            }
            ("POST", "/v1/qa_spans") => {
                let (question, context) = (s("question"), s("context"));
                let req = QaSpansRequest {
                    question: &question,
                    context: &context,
                    top_k: n("top_k"),
                };
                let spans: Vec<Value> = stub
                    .qa_spans(&req)
                    .unwrap()
                    .into_iter()
                    .map(|x| json!({"text": x.text, "start": x.start, "end": x.end, "score": x.score}))
                    .collect();
                json!({"spans": spans})
            }
            _ => return (404, json!({"error": "no such route"}).to_string()),
        };
        (200, reply.to_string())
    }
}
