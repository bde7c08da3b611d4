//! Rank candidates by voltage sensitivity to a small var probe and compare
//! against the covariance placement.

use varplace::dynsim::{initialize_dynamics, ContingencySpec, SimConfig};
use varplace::fixtures;
use varplace::netmodel::{load_case, solve_power_flow, DEFAULT_MAX_ITER, DEFAULT_TOL};
use varplace::vsi::{vsi_rank, WeightedContingency};

fn main() -> varplace::Result<()> {
    let net = load_case(fixtures::FIDVR_8BUS)?;
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let devices = initialize_dynamics(&net, &pf)?;

    let worst = WeightedContingency { contingency: ContingencySpec::new("b3@4", 4, 3, 5.0), weight: 1.0 };
    let r = vsi_rank(&net, &devices, &[worst], &net.candidate_buses, 25.0, false, &SimConfig::default())?;
    for (i, bus) in r.candidates.iter().enumerate() {
        println!("bus {bus}: normalized {:.4}, overall {:.4}", r.normalized[0][i], r.overall[i]);
    }
    println!("ranking {:?}", r.ranking);
    println!("two SVCs go to {:?}", r.top(2));
    Ok(())
}
