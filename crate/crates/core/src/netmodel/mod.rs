//! Static network model: buses, branches, case ingestion, the bus admittance
//! matrix and the Newton-Raphson power flow that sets the pre-fault operating point.

mod case;
mod powerflow;
mod ybus;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use case::load_case;
pub use powerflow::{solve_power_flow, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use ybus::{admittance_matrix, admittance_matrix_excluding};

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

impl BusKind {
    /// Slack and PV buses host generators.
    pub fn is_generator(self) -> bool {
        matches!(self, BusKind::Slack | BusKind::Pv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    /// Voltage magnitude setpoint in pu (PV and slack); initial guess for PQ.
    pub v_setpoint: f64,
    /// MW
    pub p_load: f64,
    /// Mvar
    pub q_load: f64,
    /// MW, scheduled (ignored at the slack bus)
    pub p_gen: f64,
    /// Shunt conductance, MW drawn at 1 pu.
    pub g_shunt: f64,
    /// Shunt susceptance, Mvar injected at 1 pu.
    pub b_shunt: f64,
    pub nominal_kv: Option<f64>,
}

impl Bus {
    pub fn new(id: BusId, kind: BusKind) -> Self {
        Bus {
            id,
            kind,
            v_setpoint: 1.0,
            p_load: 0.0,
            q_load: 0.0,
            p_gen: 0.0,
            g_shunt: 0.0,
            b_shunt: 0.0,
            nominal_kv: None,
        }
    }

    pub fn has_load(&self) -> bool {
        self.p_load != 0.0 || self.q_load != 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: u32,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, pu.
    pub b_shunt: f64,
    pub in_service: bool,
}

impl Branch {
    pub fn new(id: u32, from_bus: BusId, to_bus: BusId, r: f64, x: f64) -> Self {
        Branch { id, from_bus, to_bus, r, x, b_shunt: 0.0, in_service: true }
    }

    pub fn touches(&self, bus: BusId) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }
}

/// Optional per-bus generator parameters from the case document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub bus: BusId,
    pub h: f64,
    pub d: f64,
    pub xd_prime: f64,
}

impl GeneratorParams {
    pub fn default_at(bus: BusId) -> Self {
        GeneratorParams { bus, h: 5.0, d: 2.0, xd_prime: 0.1 }
    }
}

/// Optional per-bus recovery-load parameters from the case document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub bus: BusId,
    pub static_fraction: f64,
    pub alpha_t: f64,
    pub alpha_s: f64,
    pub tp: f64,
    pub tq: f64,
}

impl LoadParams {
    pub fn default_at(bus: BusId) -> Self {
        LoadParams { bus, static_fraction: 0.6, alpha_t: 2.0, alpha_s: 0.0, tp: 1.5, tq: 1.5 }
    }
}

/// SVC regulator parameters. `bus = None` is the template applied to every
/// placement without a bus-specific entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub bus: Option<BusId>,
    pub tr: f64,
    pub kr: f64,
    pub deadband: f64,
    /// Reference voltage; `None` means the pre-fault voltage at the bus.
    pub v_ref: Option<f64>,
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams { bus: None, tr: 0.05, kr: 50.0, deadband: 0.02, v_ref: None }
    }
}

/// Device overrides carried by the case document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicData {
    pub generators: Vec<GeneratorParams>,
    pub loads: Vec<LoadParams>,
    pub svcs: Vec<SvcParams>,
}

impl DynamicData {
    pub fn generator(&self, bus: BusId) -> GeneratorParams {
        self.generators.iter().find(|g| g.bus == bus).cloned().unwrap_or_else(|| GeneratorParams::default_at(bus))
    }

    pub fn load(&self, bus: BusId) -> LoadParams {
        self.loads.iter().find(|l| l.bus == bus).cloned().unwrap_or_else(|| LoadParams::default_at(bus))
    }

    pub fn svc(&self, bus: BusId) -> SvcParams {
        self.svcs
            .iter()
            .find(|s| s.bus == Some(bus))
            .or_else(|| self.svcs.iter().find(|s| s.bus.is_none()))
            .cloned()
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Sorted by bus id.
    pub buses: Vec<Bus>,
    /// Sorted by branch id.
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    pub frequency_hz: f64,
    /// Sorted load-bus ids eligible for var sources.
    pub candidate_buses: Vec<BusId>,
    pub dynamics: DynamicData,
}

impl Network {
    /// Builds a network, sorting buses and branches by id and running the
    /// structural checks (connectivity excluded, see [`Network::validate`]).
    pub fn new(
        mut buses: Vec<Bus>,
        mut branches: Vec<Branch>,
        base_mva: f64,
        candidate_buses: Vec<BusId>,
    ) -> Result<Self> {
        buses.sort_by_key(|b| b.id);
        branches.sort_by_key(|b| b.id);
        let mut candidate_buses = candidate_buses;
        candidate_buses.sort_unstable();
        let net = Network {
            buses,
            branches,
            base_mva,
            frequency_hz: 60.0,
            candidate_buses,
            dynamics: DynamicData::default(),
        };
        net.check_structure()?;
        Ok(net)
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_ids(&self) -> Vec<BusId> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id).ok()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.index_of(id).map(|i| &self.buses[i])
    }

    pub fn branch(&self, id: u32) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Slack).expect("validated network has a slack bus")
    }

    /// Full validation: structure plus connectivity over in-service branches.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        let islands = self.components(&BTreeSet::new());
        if islands.iter().filter(|c| !c.is_empty()).count() > 1 {
            return Err(Error::InvalidCase(format!(
                "network is not connected over in-service branches ({} islands)",
                islands.len()
            )));
        }
        Ok(())
    }

    fn check_structure(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::InvalidCase(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidCase(format!("frequency_hz must be positive, got {}", self.frequency_hz)));
        }
        for pair in self.buses.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId { what: "bus", id: pair[0].id });
            }
        }
        for pair in self.branches.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId { what: "branch", id: pair[0].id });
            }
        }
        let slack = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 {
            return Err(Error::SlackCount(slack));
        }
        for bus in &self.buses {
            if !(bus.v_setpoint > 0.5 && bus.v_setpoint < 1.5) {
                return Err(Error::InvalidCase(format!(
                    "bus {}: v_setpoint {} outside (0.5, 1.5) pu",
                    bus.id, bus.v_setpoint
                )));
            }
            let finite = [bus.p_load, bus.q_load, bus.p_gen, bus.g_shunt, bus.b_shunt].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidCase(format!("bus {}: non-finite load or generation", bus.id)));
            }
        }
        for br in &self.branches {
            for bus in [br.from_bus, br.to_bus] {
                if self.index_of(bus).is_none() {
                    return Err(Error::DanglingBus { branch: br.id, bus });
                }
            }
            if br.from_bus == br.to_bus {
                return Err(Error::InvalidCase(format!("branch {} connects bus {} to itself", br.id, br.from_bus)));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::InvalidCase(format!("branch {} has zero impedance", br.id)));
            }
            if !(br.r.is_finite() && br.x.is_finite() && br.b_shunt.is_finite()) {
                return Err(Error::InvalidCase(format!("branch {} has non-finite parameters", br.id)));
            }
        }
        for &c in &self.candidate_buses {
            match self.bus(c) {
                None => return Err(Error::InvalidCase(format!("candidate bus {c} is not defined"))),
                Some(b) if b.kind != BusKind::Pq => {
                    return Err(Error::InvalidCase(format!("candidate bus {c} is not a PQ bus")))
                }
                _ => {}
            }
        }
        for pair in self.candidate_buses.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateId { what: "candidate", id: pair[0] });
            }
        }
        for g in &self.dynamics.generators {
            match self.bus(g.bus) {
                None => return Err(Error::InvalidCase(format!("generator at undefined bus {}", g.bus))),
                Some(b) if !b.kind.is_generator() => {
                    return Err(Error::InvalidCase(format!("generator at PQ bus {}", g.bus)))
                }
                _ => {}
            }
            if !(g.h > 0.0 && g.xd_prime > 0.0) {
                return Err(Error::InvalidCase(format!("generator at bus {}: H and xd' must be positive", g.bus)));
            }
        }
        for l in &self.dynamics.loads {
            if self.bus(l.bus).is_none() {
                return Err(Error::InvalidCase(format!("load model at undefined bus {}", l.bus)));
            }
            if !(l.tp > 0.0 && l.tq > 0.0) || l.alpha_t < l.alpha_s || l.alpha_s < 0.0 {
                return Err(Error::InvalidCase(format!(
                    "load model at bus {}: need Tp, Tq > 0 and alpha_t >= alpha_s >= 0",
                    l.bus
                )));
            }
            if !(0.0..=1.0).contains(&l.static_fraction) {
                return Err(Error::InvalidCase(format!("load model at bus {}: static_fraction outside [0, 1]", l.bus)));
            }
        }
        for s in &self.dynamics.svcs {
            if let Some(bus) = s.bus {
                if self.bus(bus).is_none() {
                    return Err(Error::InvalidCase(format!("svc parameters for undefined bus {bus}")));
                }
            }
            if !(s.tr > 0.0 && s.kr > 0.0 && s.deadband >= 0.0) {
                return Err(Error::InvalidCase("svc parameters need Tr > 0, Kr > 0, deadband >= 0".into()));
            }
        }
        Ok(())
    }

    /// Connected components (as sorted bus index lists) over in-service
    /// branches, skipping the branch ids in `open`.
    pub fn components(&self, open: &BTreeSet<u32>) -> Vec<Vec<usize>> {
        let n = self.n_bus();
        let mut adjacency = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.in_service && !open.contains(&b.id)) {
            let (f, t) = (self.index_of(br.from_bus).unwrap(), self.index_of(br.to_bus).unwrap());
            adjacency[f].push(t);
            adjacency[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                comp.push(i);
                for &j in &adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Whether opening `branch` splits the in-service network.
    pub fn opening_islands(&self, branch: u32) -> bool {
        let open = BTreeSet::from([branch]);
        self.components(&open).len() > self.components(&BTreeSet::new()).len()
    }

    /// Map from bus id to its kind, used by the criteria checker.
    pub fn bus_kinds(&self) -> BTreeMap<BusId, BusKind> {
        self.buses.iter().map(|b| (b.id, b.kind)).collect()
    }
}
