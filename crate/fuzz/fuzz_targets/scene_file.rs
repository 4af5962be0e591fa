#![no_main]

use epd_core::geometry::Point2;
use epd_core::scene::parse_scenes;
use libfuzzer_sys::fuzz_target;

/// Largest mask the target will decode.
const MAX_PIXELS: u64 = 1 << 16;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(scenes) = parse_scenes(text) else {
        return;
    };
    for s in scenes {
        if s.dims.area() > MAX_PIXELS {
            continue;
        }
        // points in the frame resolve, points outside do not
        let c = s.gt_bbox.center();
        assert!(s.contains(Point2::new(c.x, c.y)).is_ok());
        assert!(s.contains(Point2::new(-1.0, 0.0)).is_err());
    }
});
