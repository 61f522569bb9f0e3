#![no_main]
use cohortflow::data::{parse_cohort_str, CohortConfig};
use libfuzzer_sys::fuzz_target;

// Input is `baseline \0 events`.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let (baseline, events) = s.split_once('\0').unwrap_or((s, ""));
    let config = CohortConfig { horizon: 30, ..CohortConfig::default() };
    if let Ok(cohort) = parse_cohort_str(baseline, events, &config) {
        assert!(cohort.sequences.iter().all(|q| q.statuses.len() == 31));
    }
});
