#![no_main]
use cohortflow::data::CohortConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(config) = CohortConfig::from_toml_str(s) {
            let _ = config.coding();
            let _ = CohortConfig::from_toml_str(&config.to_toml_string());
        }
    }
});
