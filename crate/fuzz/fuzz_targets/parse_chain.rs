#![no_main]

use libfuzzer_sys::fuzz_target;
use ratsemi::config::parse_chain;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chain) = parse_chain(text) {
        let deg = chain.degrees();
        assert!(deg.d1 >= deg.d0);
        if chain.len() <= 4 && chain.max_degree() <= 8 {
            let _ = chain.enumerate_words(2, 64);
        }
    }
});
