#![no_main]

use epd_core::bench::BenchConfig;
use epd_core::pipeline::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_json(text) {
        // accepted configs validate and hash without panicking
        let _ = config.validate_by_stage();
        let _ = config.digest();
    }
    if let Ok(bench) = serde_json::from_str::<BenchConfig>(text) {
        let _ = bench.validate();
    }
});
