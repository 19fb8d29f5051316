use std::path::{Path, PathBuf};

use branchmax::distributions::DiscreteLaw;
use branchmax::pgf::{exact_max_cdf, Conditioning, ProcessSpec};
use branchmax::suite::{enumerate_trees, load_suite, parse_config, resolved_toml, run_experiment};
use proptest::prelude::*;

fn suite_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper_suite/suite.toml")
}

#[test]
fn shipped_suite_loads_and_round_trips() {
    let cfgs = load_suite(&suite_file()).unwrap();
    assert_eq!(cfgs.len(), 21);
    for cfg in &cfgs {
        let again = parse_config(&resolved_toml(cfg).unwrap()).unwrap();
        assert_eq!(resolved_toml(&again).unwrap(), resolved_toml(cfg).unwrap(), "{}", cfg.id);
    }
}

#[test]
fn deterministic_experiments_pass() {
    for cfg in load_suite(&suite_file()).unwrap().iter().filter(|c| !c.experiment.is_stochastic()) {
        let out = run_experiment(cfg).unwrap();
        assert!(out.report.pass, "{}: {} > {}", cfg.id, out.report.sup_distance, out.report.tolerance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_law_matches_tree_enumeration(p0 in 0.05f64..0.9, p1 in 0.0f64..1.0, n in 1u64..4) {
        let p1 = p1 * (1.0 - p0);
        let pmf = vec![p0, p1, 1.0 - p0 - p1];
        let spec = ProcessSpec::plain(DiscreteLaw::tabulated(pmf.clone()).unwrap());
        let trees = enumerate_trees(&pmf, n);
        for x in 0..3u64 {
            let brute: f64 = trees.iter().filter(|((_, m), _)| *m <= x).map(|(_, w)| w).sum();
            let exact = exact_max_cdf(&spec, n, x as f64, Conditioning::None).unwrap();
            prop_assert!((exact - brute).abs() < 1e-12, "x = {x}: {exact} vs {brute}");
        }
    }
}
