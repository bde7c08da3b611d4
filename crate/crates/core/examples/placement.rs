//! Place SVCs on the 8-bus case by maximizing the determinant of the summed
//! covariances, comparing the three solvers.

use varplace::dynsim::{initialize_dynamics, ContingencySpec, SimConfig};
use varplace::ecc::{build_covariances, EccMode, ExcitationPlan};
use varplace::fixtures;
use varplace::netmodel::{load_case, solve_power_flow, DEFAULT_MAX_ITER, DEFAULT_TOL};
use varplace::placement::{solve_exhaustive, solve_greedy, solve_mads, MadsConfig, PlacementProblem};

fn main() -> varplace::Result<()> {
    let net = load_case(fixtures::FIDVR_8BUS)?;
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let devices = initialize_dynamics(&net, &pf)?;
    let cfg = SimConfig::default();

    let mode = EccMode::FaultSpecified { contingency: ContingencySpec::new("b3@4", 4, 3, 5.0) };
    let covs =
        build_covariances(&net, &devices, &mode, &ExcitationPlan::fault_specified(), &net.candidate_buses, &cfg)?;
    for c in &covs {
        println!("candidate {}: trace {:.3e}", c.bus, c.covariance.trace());
    }
    let entries: Vec<_> = covs.into_iter().map(|c| (c.bus, c.covariance)).collect();

    for v in 1..=4 {
        let problem = PlacementProblem::new(entries.clone(), v)?;
        let ex = solve_exhaustive(&problem)?;
        let gr = solve_greedy(&problem)?;
        let ma = solve_mads(&problem, &MadsConfig::default())?;
        println!(
            "v={v}: exhaustive {:?} ({:.3}), greedy {:?} ({:.3}), mads {:?} ({:.3}, {} evaluations)",
            ex.selected, ex.objective, gr.selected, gr.objective, ma.selected, ma.objective, ma.evaluations
        );
    }
    Ok(())
}
