#![no_main]

use epd_core::geometry::{BBox, ImageDims, PerturbationRegime};
use epd_core::sampler::Strategy;
use epd_core::scene::ShapeKind;
use epd_core::spiral::{Direction, Terminal};
use epd_core::viz::Aspect;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(b) = s.parse::<BBox>() {
        // Display prints shortest round-trip floats
        assert_eq!(b.to_string().parse::<BBox>().expect("reparse"), b);
    }
    if let Ok(d) = s.parse::<ImageDims>() {
        assert_eq!(d.to_string().parse::<ImageDims>().expect("reparse"), d);
    }
    let _ = s.parse::<Strategy>();
    let _ = s.parse::<PerturbationRegime>();
    let _ = s.parse::<ShapeKind>();
    let _ = s.parse::<Aspect>();
    let _ = s.parse::<Direction>();
    let _ = s.parse::<Terminal>();
});
