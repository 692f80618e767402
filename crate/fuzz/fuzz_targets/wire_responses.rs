#![no_main]

use libfuzzer_sys::fuzz_target;
use listgen::gateway::protocol;

fuzz_target!(|data: &[u8]| {
    let _ = protocol::decode_summarize(data);
    let _ = protocol::decode_ner(data);
    let _ = protocol::decode_question(data);
    let _ = protocol::decode_qa_spans(data);
    let _ = protocol::decode_health(data);
    let _ = protocol::decode_error(data);
});
