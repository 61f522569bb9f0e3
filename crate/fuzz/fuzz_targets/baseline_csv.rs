#![no_main]
use cohortflow::data::{parse_baseline, CohortConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_baseline(data, "baseline.csv", &CohortConfig::default());
});
