#![no_main]

use libfuzzer_sys::fuzz_target;
use ratsemi::io::parse_measure_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_measure_csv(text) {
        assert!(m.atoms().iter().all(|a| a.weight > 0.0));
    }
});
