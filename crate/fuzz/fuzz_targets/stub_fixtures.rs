#![no_main]

use libfuzzer_sys::fuzz_target;
use listgen::gateway::{Lexicon, QaFixture};
use listgen::text::char_slice;

const CONTEXT: &str = "Rice and Baylor met Yale in Zürich. Le Notre won.";

fuzz_target!(|data: &[u8]| {
    if let Ok(lexicon) = Lexicon::from_json(data) {
        for m in lexicon.tag(CONTEXT) {
            assert_eq!(char_slice(CONTEXT, m.start, m.end), Some(m.text.as_str()));
        }
    }
    if let Ok(qa) = QaFixture::from_json(data) {
        for s in qa.spans("*", CONTEXT) {
            assert_eq!(char_slice(CONTEXT, s.start, s.end), Some(s.text.as_str()));
            assert!((0.0..=1.0).contains(&s.score));
        }
    }
});
