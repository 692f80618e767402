#![no_main]

use libfuzzer_sys::fuzz_target;
use listgen::evaluation::{parse_answer_map, score_all, EvalInput, MatchMode};

fuzz_target!(|data: &[u8]| {
    let Ok((sets, _)) = parse_answer_map(data) else { return };
    let Ok(input) = EvalInput::new(sets.clone(), sets) else { return };
    if let Ok(s) = score_all(&input, MatchMode::Subsequence) {
        assert!(s.exact.f1 <= s.partial.f1 + 1e-12);
        for v in [s.exact.precision, s.exact.recall, s.partial.precision, s.partial.recall] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
});
