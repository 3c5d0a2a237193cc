#![no_main]

use libfuzzer_sys::fuzz_target;
use ratsemi::config::parse_poly;
use ratsemi::poly::DEFAULT_CLUSTER_TOL;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_poly(text) {
        if (1..=32).contains(&p.degree()) {
            if let Ok(rs) = p.roots(DEFAULT_CLUSTER_TOL) {
                assert_eq!(rs.total_multiplicity(), p.degree());
            }
        }
    }
});
