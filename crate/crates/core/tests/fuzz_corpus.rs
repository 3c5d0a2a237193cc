//! Replays the fuzz corpus seeds through the parsers with the fuzz targets'
//! checks, so the seeds stay valid as the formats evolve.

use std::path::PathBuf;

use ratsemi::config::{parse_chain, parse_map, parse_poly, parse_run_config};
use ratsemi::io::parse_measure_csv;

fn seeds(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds for {target}");
    files
        .into_iter()
        .map(|f| std::fs::read_to_string(f).unwrap())
        .collect()
}

#[test]
fn run_config_seeds_round_trip() {
    for s in seeds("parse_run_config") {
        let cfg = parse_run_config(&s).unwrap();
        let once = cfg.to_json();
        assert_eq!(parse_run_config(&once).unwrap().to_json(), once);
    }
}

#[test]
fn chain_and_map_seeds_parse() {
    for s in seeds("parse_chain") {
        let c = parse_chain(&s).unwrap();
        assert!(c.d1() >= c.d0());
    }
    let maps: Vec<_> = seeds("parse_map")
        .iter()
        .map(|s| parse_map(s).unwrap().degree())
        .collect();
    // The unreduced seed (z^2 - 1)/(z - 1) collapses to degree 1.
    assert_eq!(maps, vec![1, 2, 1]);
}

#[test]
fn poly_seeds_have_full_root_count() {
    for s in seeds("parse_poly") {
        let p = parse_poly(&s).unwrap();
        let rs = p.roots(ratsemi::poly::DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(rs.total_multiplicity(), p.degree());
    }
}

#[test]
fn measure_seeds_parse() {
    for s in seeds("parse_measure_csv") {
        let m = parse_measure_csv(&s).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-12);
    }
}
