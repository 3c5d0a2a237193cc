#![no_main]

use libfuzzer_sys::fuzz_target;
use ratsemi::config::parse_map;
use ratsemi::sphere::P1Point;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_map(text) {
        if g.degree() <= 16 {
            let p = P1Point::from_re_im(0.3, -0.7);
            if let Ok(q) = g.evaluate(&p) {
                let _ = g.spherical_multiplier(&q);
            }
            let _ = g.preimages(&p);
        }
    }
});
