//! Screen the N-1 list for delayed voltage recovery and rank the survivors.

use varplace::dynsim::{initialize_dynamics, simulate, SimConfig, Trajectory};
use varplace::fixtures;
use varplace::netmodel::{load_case, solve_power_flow, DEFAULT_MAX_ITER, DEFAULT_TOL};
use varplace::screening::{fidvr_filter, generate_n1, DEFAULT_CYCLES, DEFAULT_DURATIONS};
use varplace::vsi::{criteria_label, severity_rank, ContingencyRun, CriteriaSpec};

fn main() -> varplace::Result<()> {
    let net = load_case(fixtures::FIDVR_8BUS)?;
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let devices = initialize_dynamics(&net, &pf)?;
    let cfg = SimConfig::default();
    let criteria = CriteriaSpec::default();

    let list = generate_n1(&net, DEFAULT_CYCLES);
    let screen = fidvr_filter(&list, &net, &devices, &criteria, &DEFAULT_DURATIONS, &cfg)?;
    println!("{} contingencies, {} violate for some duration", list.len(), screen.filtered.len());

    let trajs: Vec<Trajectory> = screen
        .filtered
        .entries
        .iter()
        .map(|e| simulate(&net, &devices, Some(&e.spec), &[], &cfg))
        .collect::<varplace::Result<_>>()?;
    let runs: Vec<ContingencyRun> = screen
        .filtered
        .entries
        .iter()
        .zip(&trajs)
        .map(|(e, t)| ContingencyRun {
            id: &e.spec.id,
            trajectory: t,
            clearing_time: e.spec.clearing_time(&cfg, net.frequency_hz),
        })
        .collect();
    let kinds: Vec<_> = net.buses.iter().map(|b| b.kind).collect();
    let report = severity_rank(&runs, &devices.v0(), &criteria, &kinds, cfg.n_steps() + 1, net.frequency_hz)?;
    for id in report.ranking.iter().take(6) {
        let e = report.entries.iter().find(|e| &e.contingency == id).unwrap();
        println!("{id:>7}  SI {:.5}  criteria {}", e.si, criteria_label(e.criteria));
    }
    Ok(())
}
