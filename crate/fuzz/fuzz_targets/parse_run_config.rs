#![no_main]

use libfuzzer_sys::fuzz_target;
use ratsemi::config::parse_run_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_run_config(text) {
        // Accepted configs must survive a round trip unchanged.
        let once = cfg.to_json();
        let again = parse_run_config(&once).expect("canonical config parses");
        assert_eq!(again.to_json(), once);
    }
});
