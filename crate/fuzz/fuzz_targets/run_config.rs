#![no_main]

use libfuzzer_sys::fuzz_target;
use questa_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::parse(text, None) else {
        return;
    };
    let again = RunConfig::parse(&cfg.to_toml(), None).expect("re-parse emitted TOML");
    assert_eq!(again, cfg);
});
