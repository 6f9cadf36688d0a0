#![no_main]

use libfuzzer_sys::fuzz_target;
use smartfilter_core::model::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml(text) {
            let _ = cfg.validate();
            let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(again.to_toml(), cfg.to_toml());
        }
    }
});
