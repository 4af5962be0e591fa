#![no_main]

use epd_core::pipeline::PromptBundle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bundle) = PromptBundle::from_json(text) {
        let out = bundle.to_json().expect("serialize");
        // fixed-precision output is stable after one pass
        let again = PromptBundle::from_json(&out).expect("reparse own output");
        assert_eq!(again.to_json().expect("serialize"), out);
    }
});
