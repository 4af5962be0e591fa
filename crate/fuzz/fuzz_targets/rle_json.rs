#![no_main]

use epd_core::scene::Rle;
use libfuzzer_sys::fuzz_target;

const MAX_PIXELS: u64 = 1 << 16;

fuzz_target!(|data: &[u8]| {
    let Ok(rle) = serde_json::from_slice::<Rle>(data) else {
        return;
    };
    let pixels = u64::from(rle.height()) * u64::from(rle.width());
    let _ = rle.tight_bbox();
    if pixels > MAX_PIXELS || rle.validate().is_err() {
        return;
    }
    let bits = rle.decode().expect("validated runs decode");
    assert_eq!(bits.len() as u64, pixels);
    assert_eq!(bits.iter().filter(|b| **b).count() as u64, rle.area());
    let back = Rle::encode(&bits, rle.height(), rle.width()).expect("encode");
    assert_eq!(back.decode().expect("decode"), bits);
    let coco = back.to_coco_counts().expect("coco counts");
    let from = Rle::from_coco_counts(rle.height(), rle.width(), &coco).expect("from coco");
    assert_eq!(from.decode().expect("decode"), bits);
});
