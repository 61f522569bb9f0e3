#![no_main]
use cohortflow::data::parse_events;
use libfuzzer_sys::fuzz_target;
use std::collections::BTreeSet;

fuzz_target!(|data: &[u8]| {
    let known: BTreeSet<&str> = ["P001", "P002", "P003"].into_iter().collect();
    if let Ok(events) = parse_events(data, "events.csv", &known, 40) {
        for e in &events {
            assert!(e.start_day <= e.end_day && e.end_day <= 40);
        }
    }
});
