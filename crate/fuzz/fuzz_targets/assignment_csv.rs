#![no_main]
use cohortflow::clustering::ClusterMethod;
use cohortflow::data::synth::{generate_synthetic, SynthSpec};
use cohortflow::pipeline::parse_assignment_csv;
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

fuzz_target!(|data: &[u8]| {
    static COHORT: OnceLock<cohortflow::data::Cohort> = OnceLock::new();
    let cohort = COHORT.get_or_init(|| {
        let spec = SynthSpec { n: 6, arm_a: 3, horizon: 40, ..SynthSpec::default() };
        generate_synthetic(&spec, 1).expect("fixture").cohort
    });
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(a) = parse_assignment_csv(s, cohort, ClusterMethod::WardKnowledge) {
            assert_eq!(a.labels.len(), cohort.len());
            assert!(a.check().is_ok());
        }
    }
});
