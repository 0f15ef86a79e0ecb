#![no_main]

use catafinger::config::SceneConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SceneConfig::parse(text) {
        // Whatever parses must re-serialize to text that parses the same.
        let again = SceneConfig::parse(&cfg.to_canonical_string()).expect("canonical text parses");
        assert_eq!(again.to_canonical_string(), cfg.to_canonical_string());
        let _ = cfg.build();
    }
});
