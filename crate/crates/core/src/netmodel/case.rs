//! Case document reader.
//!
//! The document is TOML with a fixed schema:
//!
//! ```toml
//! [system]
//! base_mva = 100.0
//! frequency_hz = 60.0
//!
//! [[bus]]
//! id = 1
//! kind = "slack"      # slack | pv | pq
//! v_setpoint = 1.02
//! p_load = 0.0        # MW
//! q_load = 0.0        # Mvar
//! p_gen = 0.0         # MW
//!
//! [[branch]]
//! id = 1
//! from = 1
//! to = 2
//! r = 0.0
//! x = 0.1
//! b = 0.0
//! status = 1
//!
//! [candidates]
//! buses = [2]
//! ```
//!
//! Optional `[[generator]]`, `[[load_dyn]]` and `[[svc]]` tables override
//! device parameters. Unknown keys are rejected.

use serde::Deserialize;

use super::{Branch, Bus, BusId, BusKind, DynamicData, GeneratorParams, LoadParams, Network, SvcParams};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    system: SystemDoc,
    #[serde(default)]
    bus: Vec<BusDoc>,
    #[serde(default)]
    branch: Vec<BranchDoc>,
    candidates: Option<CandidatesDoc>,
    #[serde(default)]
    generator: Vec<GeneratorDoc>,
    #[serde(default)]
    load_dyn: Vec<LoadDoc>,
    #[serde(default)]
    svc: Vec<SvcDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    base_mva: f64,
    #[serde(default = "default_frequency")]
    frequency_hz: f64,
}

fn default_frequency() -> f64 {
    60.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: BusId,
    kind: BusKind,
    #[serde(default = "one")]
    v_setpoint: f64,
    #[serde(default)]
    p_load: f64,
    #[serde(default)]
    q_load: f64,
    #[serde(default)]
    p_gen: f64,
    #[serde(default)]
    g_shunt: f64,
    #[serde(default)]
    b_shunt: f64,
    nominal_kv: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StatusDoc {
    Flag(bool),
    Code(i64),
}

impl Default for StatusDoc {
    fn default() -> Self {
        StatusDoc::Flag(true)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchDoc {
    id: u32,
    from: BusId,
    to: BusId,
    #[serde(default)]
    r: f64,
    x: f64,
    #[serde(default)]
    b: f64,
    #[serde(default)]
    status: StatusDoc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidatesDoc {
    buses: Vec<BusId>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    bus: BusId,
    h: Option<f64>,
    d: Option<f64>,
    xd_prime: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    bus: BusId,
    static_fraction: Option<f64>,
    alpha_t: Option<f64>,
    alpha_s: Option<f64>,
    tp: Option<f64>,
    tq: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvcDoc {
    bus: Option<BusId>,
    tr: Option<f64>,
    kr: Option<f64>,
    deadband: Option<f64>,
    v_ref: Option<f64>,
}

/// Parses and validates a case document.
pub fn load_case(text: &str) -> Result<Network> {
    let doc: CaseDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;

    let buses: Vec<Bus> = doc
        .bus
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            kind: b.kind,
            v_setpoint: b.v_setpoint,
            p_load: b.p_load,
            q_load: b.q_load,
            p_gen: b.p_gen,
            g_shunt: b.g_shunt,
            b_shunt: b.b_shunt,
            nominal_kv: b.nominal_kv,
        })
        .collect();

    let mut branches = Vec::with_capacity(doc.branch.len());
    for b in doc.branch {
        let in_service = match b.status {
            StatusDoc::Flag(f) => f,
            StatusDoc::Code(1) => true,
            StatusDoc::Code(0) => false,
            StatusDoc::Code(other) => {
                return Err(Error::Parse(format!("branch {}: status must be 0 or 1, got {other}", b.id)))
            }
        };
        branches.push(Branch { id: b.id, from_bus: b.from, to_bus: b.to, r: b.r, x: b.x, b_shunt: b.b, in_service });
    }

    let candidates = match doc.candidates {
        Some(c) => c.buses,
        None => buses.iter().filter(|b| b.kind == BusKind::Pq).map(|b| b.id).collect(),
    };

    let mut net = Network::new(buses, branches, doc.system.base_mva, candidates)?;
    net.frequency_hz = doc.system.frequency_hz;

    net.dynamics = DynamicData {
        generators: doc
            .generator
            .into_iter()
            .map(|g| {
                let d = GeneratorParams::default_at(g.bus);
                GeneratorParams {
                    bus: g.bus,
                    h: g.h.unwrap_or(d.h),
                    d: g.d.unwrap_or(d.d),
                    xd_prime: g.xd_prime.unwrap_or(d.xd_prime),
                }
            })
            .collect(),
        loads: doc
            .load_dyn
            .into_iter()
            .map(|l| {
                let d = LoadParams::default_at(l.bus);
                LoadParams {
                    bus: l.bus,
                    static_fraction: l.static_fraction.unwrap_or(d.static_fraction),
                    alpha_t: l.alpha_t.unwrap_or(d.alpha_t),
                    alpha_s: l.alpha_s.unwrap_or(d.alpha_s),
                    tp: l.tp.unwrap_or(d.tp),
                    tq: l.tq.unwrap_or(d.tq),
                }
            })
            .collect(),
        svcs: doc
            .svc
            .into_iter()
            .map(|s| {
                let d = SvcParams::default();
                SvcParams {
                    bus: s.bus,
                    tr: s.tr.unwrap_or(d.tr),
                    kr: s.kr.unwrap_or(d.kr),
                    deadband: s.deadband.unwrap_or(d.deadband),
                    v_ref: s.v_ref,
                }
            })
            .collect(),
    };
    net.validate()?;
    Ok(net)
}
