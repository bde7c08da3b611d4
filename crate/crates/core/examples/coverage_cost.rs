//! How many screened contingencies a placement fixes, and the cost curve
//! behind the choice of SVC count.

use varplace::dynsim::{initialize_dynamics, SimConfig};
use varplace::fixtures;
use varplace::netmodel::{load_case, solve_power_flow, DEFAULT_MAX_ITER, DEFAULT_TOL};
use varplace::screening::{
    coverage, fidvr_filter, generate_n1, optimal_svc_count, read_coverage_csv, CostModel, DEFAULT_CYCLES,
    DEFAULT_DURATIONS,
};
use varplace::vsi::CriteriaSpec;

fn main() -> varplace::Result<()> {
    let net = load_case(fixtures::FIDVR_8BUS)?;
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let devices = initialize_dynamics(&net, &pf)?;
    let cfg = SimConfig::default();
    let criteria = CriteriaSpec::default();

    let screen = fidvr_filter(&generate_n1(&net, DEFAULT_CYCLES), &net, &devices, &criteria, &DEFAULT_DURATIONS, &cfg)?;
    for placement in [vec![6], vec![5, 6, 8]] {
        let rep = coverage(&net, &devices, &placement, 100.0, &screen.filtered, &criteria, &DEFAULT_DURATIONS, &cfg)?;
        let counts: Vec<String> = rep.counts.iter().map(|c| format!("{c}/{}", rep.n_cont_total)).collect();
        println!("{placement:?}: addressed {} for {:?} cycles", counts.join(", "), DEFAULT_DURATIONS);
    }

    // a larger sample table: 40 contingencies, SVC counts 5..45
    let table = read_coverage_csv(fixtures::COVERAGE_CURVE_SAMPLE, Some(40))?;
    let model = CostModel { c_svc: 1.0, c_fidvr: 5.0 };
    let ((n_star, c_star), curve) = optimal_svc_count(&model, &table, 40)?;
    for p in &curve {
        println!("{:3} SVCs: cost {:5}", p.n_svc, p.cost);
    }
    println!("optimum {n_star} SVCs at cost {c_star}");
    Ok(())
}
