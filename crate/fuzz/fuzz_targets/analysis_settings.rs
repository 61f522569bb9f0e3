#![no_main]
use cohortflow::pipeline::AnalysisConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(config) = toml::from_str::<AnalysisConfig>(s) {
            let _ = config.validate();
        }
    }
});
