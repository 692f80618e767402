#![no_main]

use libfuzzer_sys::fuzz_target;
use listgen::corpus::{parse_corpus, parse_record};
use listgen::text::word_count;

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_record(data) {
        assert!(!p.id.is_empty());
        assert!(word_count(&p.text) > 0);
    }
    let _ = parse_corpus(data);
});
