#![no_main]

use epd_core::scene::{coco_string_decode, coco_string_encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(counts) = coco_string_decode(text) {
        let again = coco_string_encode(&counts);
        assert_eq!(
            coco_string_decode(&again).expect("re-encoded string decodes"),
            counts
        );
    }
});
