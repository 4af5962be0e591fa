#![no_main]

use epd_core::geometry::{BBoxInput, ImageDims};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(input) = BBoxInput::from_json(text) else {
        return;
    };
    let dims = ImageDims::new(640, 480).expect("dims");
    if let Ok(b) = input.resolve(dims) {
        assert!(b.x_min < b.x_max && b.y_min < b.y_max);
        if input.relative.is_some() {
            // relative boxes are clipped to the frame
            assert!(b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= 640.0 && b.y_max <= 480.0);
        }
    }
});
