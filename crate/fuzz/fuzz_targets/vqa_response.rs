#![no_main]

use epd_core::verification::{parse_vqa_response, Label};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&k, body)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(body) else {
        return;
    };
    let top_k = usize::from(k % 8) + 1;
    if let Ok(v) = parse_vqa_response(text, top_k) {
        assert!(v.raw_tokens.len() <= top_k);
        assert!(v.p_yes + v.p_no <= 1.0 + 1e-6);
        assert_eq!(v.confidence, v.p_yes.max(v.p_no));
        // ties go negative
        assert_eq!(v.label == Label::Positive, v.p_yes > v.p_no);
    }
});
