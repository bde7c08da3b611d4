mod common;

use varplace::dynsim::SimConfig;
use varplace::fixtures;
use varplace::screening::{
    coverage, fidvr_filter, generate_n1, optimal_svc_count, read_coverage_csv, total_cost, CostModel, DEFAULT_DURATIONS,
};
use varplace::vsi::CriteriaSpec;

const MODEL: CostModel = CostModel { c_svc: 1.0, c_fidvr: 5.0 };

#[test]
fn sample_table_costs() {
    let table = read_coverage_csv(fixtures::COVERAGE_CURVE_SAMPLE, Some(40)).unwrap();
    let ((n, c), curve) = optimal_svc_count(&MODEL, &table, 40).unwrap();
    assert_eq!((n, c), (25, 230.0));
    let at = |k: usize| curve.iter().find(|p| p.n_svc == k).unwrap().cost;
    assert_eq!(at(20), 250.0);
    assert_eq!(at(25), 230.0);
    assert_eq!(at(30), 235.0);
}

#[test]
fn cost_limits() {
    let table = read_coverage_csv(fixtures::COVERAGE_CURVE_SAMPLE, Some(40)).unwrap();
    let cheap = CostModel { c_svc: 1.0, c_fidvr: 1e-9 };
    assert_eq!(optimal_svc_count(&cheap, &table, 40).unwrap().0 .0, 5);
    let dear = CostModel { c_svc: 1.0, c_fidvr: 1e6 };
    assert_eq!(optimal_svc_count(&dear, &table, 40).unwrap().0 .0, 45);
    assert_eq!(total_cost(&MODEL, &[0, 0, 0], 0, 40).unwrap(), 600.0);
}

#[test]
fn n1_list_shape() {
    let net = varplace::netmodel::load_case(fixtures::FIDVR_8BUS).unwrap();
    let list = generate_n1(&net, 5.0);
    assert_eq!(list.len(), 26);
    let ids = list.ids();
    let unique: std::collections::BTreeSet<_> = ids.iter().collect();
    assert_eq!(unique.len(), ids.len());
    assert!(list.entries.iter().all(|e| !e.islanding));
}

#[test]
fn screening_and_coverage_on_fixture() {
    let (net, dev) = common::fidvr();
    let cfg = SimConfig::default();
    let spec = CriteriaSpec::default();
    let list = generate_n1(&net, 5.0);
    let screen = fidvr_filter(&list, &net, &dev, &spec, &DEFAULT_DURATIONS, &cfg).unwrap();

    // longer faults never shrink the violating set
    for w in screen.violating.windows(2) {
        assert!(w[0].iter().all(|id| w[1].contains(id)), "{:?} ⊄ {:?}", w[0], w[1]);
    }
    let filtered = screen.filtered.ids();
    let none = coverage(&net, &dev, &[], 100.0, &screen.filtered, &spec, &DEFAULT_DURATIONS, &cfg).unwrap();
    for (d, count) in none.counts.iter().enumerate() {
        assert_eq!(*count, filtered.len() - screen.violating[d].len());
    }
    let one = coverage(&net, &dev, &[6], 100.0, &screen.filtered, &spec, &DEFAULT_DURATIONS, &cfg).unwrap();
    let two = coverage(&net, &dev, &[4, 6], 100.0, &screen.filtered, &spec, &DEFAULT_DURATIONS, &cfg).unwrap();
    for d in 0..DEFAULT_DURATIONS.len() {
        assert!(two.counts[d] >= one.counts[d]);
        assert!(two.addressed[d].iter().all(|id| filtered.contains(id)));
    }
    assert!(coverage(&net, &dev, &[1], 100.0, &screen.filtered, &spec, &DEFAULT_DURATIONS, &cfg).is_err());
}

#[test]
fn flat_case_has_nothing_to_screen() {
    let (net, dev) = common::setup(fixtures::THREE_BUS);
    let list = generate_n1(&net, 5.0);
    let spec = CriteriaSpec {
        post_transient_dev: 0.5,
        load_dip_max: 0.99,
        gen_dip_max: 0.99,
        sustained_dip: 0.99,
        ..CriteriaSpec::default()
    };
    let screen = fidvr_filter(&list, &net, &dev, &spec, &[5.0], &SimConfig::default()).unwrap();
    assert_eq!(screen.outcomes.len(), list.len());
    assert!(screen.filtered.is_empty(), "{:?}", screen.filtered.ids());
}
