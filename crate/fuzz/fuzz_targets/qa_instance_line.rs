#![no_main]

use libfuzzer_sys::fuzz_target;
use listgen::pipeline::dataset::{parse_instance, serialize_instance};
use listgen::pipeline::export::to_tagged;

fuzz_target!(|data: &str| {
    if let Ok(inst) = parse_instance(data) {
        let line = serialize_instance(&inst);
        assert_eq!(parse_instance(&line).expect("re-parse"), inst);
        let tagged = to_tagged(&inst);
        assert_eq!(tagged.context_tokens.len(), tagged.labels.len());
    }
});
