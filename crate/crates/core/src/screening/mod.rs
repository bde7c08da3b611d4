//! N-1 contingency lists, FIDVR screening, placement coverage and the
//! SVC-count cost trade-off.

mod cost;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsim::{simulate, ContingencySpec, DeviceSet, InjectionSchedule, SimConfig};
use crate::error::{Error, Result};
use crate::netmodel::{BusId, BusKind, Network};
use crate::vsi::{check_criteria, CriteriaSpec};

pub use cost::{
    optimal_svc_count, read_coverage_csv, total_cost, write_cost_curve, CostModel, CoveragePoint, CurvePoint,
};

pub const DEFAULT_DURATIONS: [f64; 3] = [4.0, 5.0, 6.0];
pub const DEFAULT_CYCLES: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N1Entry {
    pub spec: ContingencySpec,
    /// Opening the branch splits the network.
    pub islanding: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContingencyList {
    pub entries: Vec<N1Entry>,
}

impl ContingencyList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.spec.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ContingencySpec> {
        self.entries.iter().find(|e| e.spec.id == id).map(|e| &e.spec)
    }

    /// Entries whose ids are in `keep`, in list order.
    pub fn subset(&self, keep: &BTreeSet<String>) -> ContingencyList {
        ContingencyList { entries: self.entries.iter().filter(|e| keep.contains(&e.spec.id)).cloned().collect() }
    }
}

/// `b<branch>@<bus>`
pub fn contingency_id(branch: u32, bus: BusId) -> String {
    format!("b{branch}@{bus}")
}

/// A three-phase fault at each end of every in-service branch, cleared by
/// opening the branch. Ordered by branch id, from-end first.
pub fn generate_n1(net: &Network, cycles: f64) -> ContingencyList {
    let mut entries = Vec::new();
    for br in net.branches.iter().filter(|b| b.in_service) {
        let islanding = net.opening_islands(br.id);
        for bus in [br.from_bus, br.to_bus] {
            entries.push(N1Entry {
                spec: ContingencySpec::new(contingency_id(br.id, bus), bus, br.id, cycles),
                islanding,
            });
        }
    }
    ContingencyList { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub contingency: String,
    pub duration: f64,
    pub violating: bool,
    pub diverged: bool,
    /// `CRIT_*` bits.
    pub criteria: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidvrScreen {
    pub durations: Vec<f64>,
    /// Every (contingency, duration) pair, contingency-major.
    pub outcomes: Vec<Outcome>,
    /// Violating ids per duration.
    pub violating: Vec<Vec<String>>,
    /// Contingencies violating for at least one duration.
    pub filtered: ContingencyList,
}

fn bus_kinds(net: &Network) -> Vec<BusKind> {
    net.buses.iter().map(|b| b.kind).collect()
}

fn check_durations(durations: &[f64]) -> Result<()> {
    if durations.is_empty() || durations.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidInput("durations must be a non-empty list of positive cycle counts".into()));
    }
    Ok(())
}

fn evaluate(
    net: &Network,
    devices: &DeviceSet,
    spec: &ContingencySpec,
    schedules: &[InjectionSchedule],
    criteria: &CriteriaSpec,
    cfg: &SimConfig,
) -> Result<Outcome> {
    let traj = simulate(net, devices, Some(spec), schedules, cfg)?;
    let flags = check_criteria(
        &traj,
        &devices.v0(),
        criteria,
        &bus_kinds(net),
        spec.clearing_time(cfg, net.frequency_hz),
        net.frequency_hz,
    )?;
    let diverged = traj.is_diverged();
    Ok(Outcome {
        contingency: spec.id.clone(),
        duration: spec.fault_duration,
        violating: diverged || flags.any(),
        diverged,
        criteria: flags.criteria(),
    })
}

fn sweep(
    net: &Network,
    devices: &DeviceSet,
    list: &ContingencyList,
    schedules: &[InjectionSchedule],
    criteria: &CriteriaSpec,
    durations: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<Outcome>> {
    criteria.validate(cfg.t_f)?;
    check_durations(durations)?;
    let jobs: Vec<(usize, f64)> = (0..list.len()).flat_map(|i| durations.iter().map(move |&d| (i, d))).collect();
    jobs.par_iter()
        .map(|&(i, d)| evaluate(net, devices, &list.entries[i].spec.with_duration(d), schedules, criteria, cfg))
        .collect()
}

/// Simulates every contingency without var support for each duration and
/// keeps those violating a criterion at least once. A diverged run counts as
/// a violation.
pub fn fidvr_filter(
    list: &ContingencyList,
    net: &Network,
    devices: &DeviceSet,
    criteria: &CriteriaSpec,
    durations: &[f64],
    cfg: &SimConfig,
) -> Result<FidvrScreen> {
    let outcomes = sweep(net, devices, list, &[], criteria, durations, cfg)?;
    let violating: Vec<Vec<String>> = (0..durations.len())
        .map(|d| {
            (0..list.len())
                .filter(|&i| outcomes[i * durations.len() + d].violating)
                .map(|i| list.entries[i].spec.id.clone())
                .collect()
        })
        .collect();
    let keep: BTreeSet<String> = violating.iter().flatten().cloned().collect();
    Ok(FidvrScreen { durations: durations.to_vec(), outcomes, violating, filtered: list.subset(&keep) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub placement: Vec<BusId>,
    pub svc_rating: f64,
    pub durations: Vec<f64>,
    /// Size of the screened list.
    pub n_cont_total: usize,
    /// Addressed count per duration.
    pub counts: Vec<usize>,
    /// Addressed ids per duration.
    pub addressed: Vec<Vec<String>>,
    /// Runs with SVCs installed that diverged (counted unaddressed).
    pub diverged: Vec<(String, f64)>,
}

impl CoverageReport {
    pub fn percentage(&self, d: usize) -> f64 {
        if self.n_cont_total == 0 {
            0.0
        } else {
            self.counts[d] as f64 / self.n_cont_total as f64 * 100.0
        }
    }

    pub fn points(&self) -> Vec<CoveragePoint> {
        self.durations
            .iter()
            .zip(&self.counts)
            .map(|(&duration, &addressed)| CoveragePoint { duration, n_svc: self.placement.len(), addressed })
            .collect()
    }

    /// `duration,n_svc,addressed,percentage`
    pub fn to_csv(&self) -> Result<String> {
        cost::write_coverage_csv(&self.points(), self.n_cont_total)
    }
}

/// Counts, per duration, the screened contingencies that no longer violate
/// any criterion once closed-loop SVCs of `svc_rating` Mvar are installed at
/// every bus of `placement`.
#[allow(clippy::too_many_arguments)]
pub fn coverage(
    net: &Network,
    devices: &DeviceSet,
    placement: &[BusId],
    svc_rating: f64,
    screened: &ContingencyList,
    criteria: &CriteriaSpec,
    durations: &[f64],
    cfg: &SimConfig,
) -> Result<CoverageReport> {
    if !(svc_rating > 0.0) {
        return Err(Error::InvalidInput("svc rating must be positive".into()));
    }
    let mut placed: Vec<BusId> = placement.to_vec();
    placed.sort_unstable();
    if placed.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("placement lists a bus twice".into()));
    }
    for b in &placed {
        if !net.candidate_buses.contains(b) {
            return Err(Error::InvalidInput(format!("bus {b} is not a candidate")));
        }
    }
    let schedules: Vec<InjectionSchedule> = placed.iter().map(|&b| InjectionSchedule::svc(b, svc_rating)).collect();
    let outcomes = sweep(net, devices, screened, &schedules, criteria, durations, cfg)?;
    let nd = durations.len();
    let addressed: Vec<Vec<String>> = (0..nd)
        .map(|d| {
            (0..screened.len())
                .filter(|&i| !outcomes[i * nd + d].violating)
                .map(|i| screened.entries[i].spec.id.clone())
                .collect()
        })
        .collect();
    let diverged = outcomes.iter().filter(|o| o.diverged).map(|o| (o.contingency.clone(), o.duration)).collect();
    Ok(CoverageReport {
        placement: placed,
        svc_rating,
        durations: durations.to_vec(),
        n_cont_total: screened.len(),
        counts: addressed.iter().map(Vec::len).collect(),
        addressed,
        diverged,
    })
}
