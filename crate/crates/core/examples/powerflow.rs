//! Solve the pre-fault operating point of the shipped 8-bus case.

use varplace::fixtures;
use varplace::netmodel::{load_case, solve_power_flow, DEFAULT_MAX_ITER, DEFAULT_TOL};

fn main() -> varplace::Result<()> {
    let net = load_case(fixtures::FIDVR_8BUS)?;
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    println!("converged in {} iterations, mismatch {:.2e} pu", pf.iterations, pf.max_mismatch);
    for (i, id) in pf.bus_ids.iter().enumerate() {
        println!("bus {id}: {:.4} pu at {:7.3} deg", pf.v_mag[i], pf.v_ang[i].to_degrees());
    }

    // a case without a solution reports non-convergence instead of a bogus point
    let heavy = load_case(fixtures::OVERLOAD)?;
    if let Err(e) = solve_power_flow(&heavy, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        println!("overload case: {e}");
    }
    Ok(())
}
