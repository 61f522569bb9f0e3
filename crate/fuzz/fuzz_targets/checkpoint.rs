#![no_main]
use cohortflow::graph::parse_checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(ck) = parse_checkpoint(s) {
            assert!(ck.params.is_finite());
        }
    }
});
