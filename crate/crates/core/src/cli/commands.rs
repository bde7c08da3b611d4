use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{Command, ModeName, StudyConfig};
use crate::dynsim::{initialize_dynamics, simulate, ContingencySpec, DeviceSet, InjectionSchedule, Trajectory};
use crate::ecc::{build_covariances, CovarianceMatrix, CovarianceStore, EccMode};
use crate::error::{Error, Result};
use crate::netmodel::{load_case, solve_power_flow, BusId, BusKind, Network, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::placement::{solve_exhaustive, solve_greedy, solve_mads, PlacementProblem, PlacementSolution, Solver};
use crate::screening::{
    coverage, fidvr_filter, generate_n1, optimal_svc_count, read_coverage_csv, write_cost_curve, ContingencyList,
    CostModel,
};
use crate::vsi::{
    check_criteria, criteria_label, severity_rank, vsi_rank, ContingencyRun, SeverityReport, WeightedContingency,
};

struct Study {
    cfg: StudyConfig,
    net: Network,
    case_hash: String,
    out: PathBuf,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Study {
    fn open(cfg: StudyConfig) -> Result<Self> {
        cfg.validate()?;
        let path = cfg
            .case
            .clone()
            .ok_or_else(|| Error::InvalidInput("no case given (use --case or set `case` in --config)".into()))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::InvalidInput(format!("cannot read case {}: {e}", path.display())))?;
        let net = load_case(&text)?;
        cfg.sim.validate(net.frequency_hz)?;
        let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("varplace-out"));
        Ok(Study { case_hash: sha256_hex(text.as_bytes()), net, cfg, out })
    }

    fn devices(&self) -> Result<DeviceSet> {
        let pf = solve_power_flow(&self.net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        initialize_dynamics(&self.net, &pf)
    }

    fn provenance(&self) -> Value {
        json!({
            "tool": "varplace",
            "version": env!("CARGO_PKG_VERSION"),
            "case_sha256": self.case_hash,
            "config_sha256": sha256_hex(self.cfg.canonical_json().as_bytes()),
            "seed": self.cfg.seed,
        })
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        crate::ecc::write_atomic(&path, contents)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let mut v = serde_json::to_value(body)?;
        if let Value::Object(m) = &mut v {
            m.insert("provenance".into(), self.provenance());
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn kinds(&self) -> Vec<BusKind> {
        self.net.buses.iter().map(|b| b.kind).collect()
    }

    fn n1(&self) -> ContingencyList {
        generate_n1(&self.net, self.cfg.screen_cycles)
    }

    fn contingency(&self, id: &str) -> Result<ContingencySpec> {
        self.n1()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("unknown contingency {id:?}; ids look like b<branch>@<bus>")))
    }

    fn severity(&self, devices: &DeviceSet, list: &ContingencyList) -> Result<SeverityReport> {
        let trajs: Vec<Trajectory> = list
            .entries
            .par_iter()
            .map(|e| simulate(&self.net, devices, Some(&e.spec), &[], &self.cfg.sim))
            .collect::<Result<_>>()?;
        let runs: Vec<ContingencyRun> = list
            .entries
            .iter()
            .zip(&trajs)
            .map(|(e, t)| ContingencyRun {
                id: &e.spec.id,
                trajectory: t,
                clearing_time: e.spec.clearing_time(&self.cfg.sim, self.net.frequency_hz),
            })
            .collect();
        severity_rank(
            &runs,
            &devices.v0(),
            &self.cfg.criteria,
            &self.kinds(),
            self.cfg.sim.n_steps() + 1,
            self.net.frequency_hz,
        )
    }

    /// The configured contingency, else the most severe of the N-1 list.
    fn study_contingency(&self, devices: &DeviceSet) -> Result<ContingencySpec> {
        if let Some(id) = &self.cfg.ecc.contingency {
            return self.contingency(id);
        }
        let list = self.n1();
        let rep = self.severity(devices, &list)?;
        let worst = rep.ranking.first().ok_or_else(|| Error::InvalidInput("the case has no contingencies".into()))?;
        Ok(list.get(worst).expect("ranked from the list").clone())
    }

    fn resolves(&self, devices: &DeviceSet, c: &ContingencySpec, placement: &[BusId]) -> Result<bool> {
        let sch: Vec<InjectionSchedule> =
            placement.iter().map(|&b| InjectionSchedule::svc(b, self.cfg.svc_rating)).collect();
        let traj = simulate(&self.net, devices, Some(c), &sch, &self.cfg.sim)?;
        let flags = check_criteria(
            &traj,
            &devices.v0(),
            &self.cfg.criteria,
            &self.kinds(),
            c.clearing_time(&self.cfg.sim, self.net.frequency_hz),
            self.net.frequency_hz,
        )?;
        Ok(!traj.is_diverged() && !flags.any())
    }
}

pub(super) fn dispatch(cmd: &Command, cfg: StudyConfig) -> Result<Vec<String>> {
    match cmd {
        Command::Cost { coverage, c_svc, c_fidvr, n_cont } => {
            cmd_cost(cfg, coverage.clone(), *c_svc, *c_fidvr, *n_cont)
        }
        Command::Powerflow => cmd_powerflow(&Study::open(cfg)?),
        Command::Simulate { duration, placement } => cmd_simulate(&Study::open(cfg)?, *duration, placement.as_deref()),
        Command::Screen => cmd_screen(&Study::open(cfg)?),
        Command::Ecc { rebuild } => {
            let study = Study::open(cfg)?;
            let devices = study.devices()?;
            let (entries, lines) = covariances(&study, &devices, *rebuild)?;
            let summary: Vec<Value> = entries
                .iter()
                .map(|(b, w)| {
                    let (lo, hi) = w.eigen_range();
                    json!({"candidate": b, "trace": w.trace(), "eig_min": lo, "eig_max": hi})
                })
                .collect();
            study.write_json("ecc.json", &json!({ "candidates": summary }))?;
            Ok(lines)
        }
        Command::Place { rebuild, compare_vsi } => cmd_place(&Study::open(cfg)?, *rebuild, *compare_vsi),
        Command::Vsi { probe, top } => {
            let mut cfg = cfg;
            if let Some(p) = probe {
                cfg.probe_mvar = *p;
            }
            if let Some(k) = top {
                cfg.top_contingencies = *k;
            }
            cmd_vsi(&Study::open(cfg)?)
        }
        Command::Coverage { placement } => cmd_coverage(&Study::open(cfg)?, placement.as_deref()),
    }
}

fn cmd_powerflow(study: &Study) -> Result<Vec<String>> {
    let pf = solve_power_flow(&study.net, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let inj = pf.injections(&study.net);
    let base = study.net.base_mva;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bus", "v_mag", "v_ang_deg", "p_mw", "q_mvar"])?;
    let mut buses = Vec::new();
    for (j, id) in pf.bus_ids.iter().enumerate() {
        let (p, q) = (inj[j].re * base, inj[j].im * base);
        let ang = pf.v_ang[j].to_degrees();
        w.write_record([id.to_string(), pf.v_mag[j].to_string(), ang.to_string(), p.to_string(), q.to_string()])?;
        buses.push(json!({"bus": id, "v_mag": pf.v_mag[j], "v_ang_deg": ang, "p_mw": p, "q_mvar": q}));
    }
    study.write("powerflow.csv", &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    let path = study.write_json(
        "powerflow.json",
        &json!({"converged": pf.converged, "iterations": pf.iterations, "max_mismatch": pf.max_mismatch, "buses": buses}),
    )?;
    Ok(vec![format!(
        "power flow converged in {} iterations (mismatch {:.2e} pu); wrote {}",
        pf.iterations,
        pf.max_mismatch,
        path.display()
    )])
}

fn cmd_simulate(study: &Study, duration: Option<f64>, placement: Option<&[u32]>) -> Result<Vec<String>> {
    let devices = study.devices()?;
    let contingency = match &study.cfg.ecc.contingency {
        Some(id) => {
            let c = study.contingency(id)?;
            Some(match duration {
                Some(d) => c.with_duration(d),
                None => c,
            })
        }
        None => None,
    };
    let sch: Vec<InjectionSchedule> =
        placement.unwrap_or(&[]).iter().map(|&b| InjectionSchedule::svc(b, study.cfg.svc_rating)).collect();
    let traj = simulate(&study.net, &devices, contingency.as_ref(), &sch, &study.cfg.sim)?;
    study.write("trajectory.csv", traj.to_csv()?.as_bytes())?;
    let mut criteria = Value::Null;
    if let Some(c) = &contingency {
        let flags = check_criteria(
            &traj,
            &devices.v0(),
            &study.cfg.criteria,
            &study.kinds(),
            c.clearing_time(&study.cfg.sim, study.net.frequency_hz),
            study.net.frequency_hz,
        )?;
        criteria = json!(criteria_label(flags.criteria()));
    }
    let v_min: Vec<Value> = traj
        .bus_ids
        .iter()
        .enumerate()
        .map(|(j, b)| json!({"bus": b, "v_min": traj.v_mag.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)}))
        .collect();
    let path = study.write_json(
        "simulate.json",
        &json!({
            "status": traj.status,
            "contingency": contingency,
            "schedules": traj.schedules,
            "samples": traj.n_samples(),
            "violated_criteria": criteria,
            "v_min": v_min,
        }),
    )?;
    let status = if traj.is_diverged() { "diverged" } else { "completed" };
    Ok(vec![format!("simulation {status} with {} samples; wrote {}", traj.n_samples(), path.display())])
}

fn cmd_screen(study: &Study) -> Result<Vec<String>> {
    let devices = study.devices()?;
    let list = study.n1();
    let screen = fidvr_filter(&list, &study.net, &devices, &study.cfg.criteria, &study.cfg.durations, &study.cfg.sim)?;
    let severity = study.severity(&devices, &list)?;
    study.write("severity.csv", severity.to_csv()?.as_bytes())?;
    let islanding: Vec<&str> = list.entries.iter().filter(|e| e.islanding).map(|e| e.spec.id.as_str()).collect();
    let path = study.write_json(
        "screen.json",
        &json!({
            "contingencies": list.ids(),
            "islanding": islanding,
            "durations": screen.durations,
            "violating": screen.violating,
            "filtered": screen.filtered.ids(),
            "outcomes": screen.outcomes,
            "severity": severity.entries,
            "ranking": severity.ranking,
        }),
    )?;
    Ok(vec![format!(
        "{} contingencies, {} with FIDVR issues; most severe {}; wrote {}",
        list.len(),
        screen.filtered.len(),
        severity.ranking.first().map(String::as_str).unwrap_or("-"),
        path.display()
    )])
}

fn ecc_mode(study: &Study, devices: &DeviceSet) -> Result<EccMode> {
    Ok(match study.cfg.ecc.mode {
        ModeName::FaultSpecified => EccMode::FaultSpecified { contingency: study.study_contingency(devices)? },
        ModeName::FaultUnspecified => EccMode::FaultUnspecified,
    })
}

fn store_key(study: &Study, mode: &EccMode) -> String {
    let plan = study.cfg.ecc.plan();
    let sim = serde_json::to_string(&study.cfg.sim).expect("config serializes");
    let mode = serde_json::to_string(mode).expect("mode serializes");
    sha256_hex(format!("{}|{}|{}|{}", study.case_hash, plan.hash(), sim, mode).as_bytes())
}

type Entry = (BusId, CovarianceMatrix);

fn covariances(study: &Study, devices: &DeviceSet, rebuild: bool) -> Result<(Vec<Entry>, Vec<String>)> {
    let mode = ecc_mode(study, devices)?;
    let key = store_key(study, &mode);
    let store = CovarianceStore::new(study.out.join("ecc"), key.clone());
    let candidates = study.net.candidate_buses.clone();
    let mut have = Vec::new();
    let mut missing = Vec::new();
    for &c in &candidates {
        match if rebuild { Ok(None) } else { store.load(c) }? {
            Some(w) => have.push((c, w)),
            None => missing.push(c),
        }
    }
    let mut lines = Vec::new();
    if !missing.is_empty() {
        let built = build_covariances(&study.net, devices, &mode, &study.cfg.ecc.plan(), &missing, &study.cfg.sim)?;
        for b in built {
            let prov = json!({"store_key": key, "runs": b.runs, "diverged_sizes": b.diverged_sizes, "run": study.provenance()});
            store.save(b.bus, &b.covariance, prov)?;
            if !b.diverged_sizes.is_empty() {
                lines.push(format!("candidate {}: runs of size {:?} Mvar diverged", b.bus, b.diverged_sizes));
            }
            have.push((b.bus, b.covariance));
        }
    }
    have.sort_by_key(|e| e.0);
    let label = match &mode {
        EccMode::FaultSpecified { contingency } => format!("fault-specified ({})", contingency.id),
        EccMode::FaultUnspecified => "fault-unspecified".into(),
    };
    lines.push(format!(
        "{label}: {} covariances built, {} reused from {}",
        missing.len(),
        candidates.len() - missing.len(),
        study.out.join("ecc").display()
    ));
    Ok((have, lines))
}

fn solve(problem: &PlacementProblem, study: &Study) -> Result<PlacementSolution> {
    match study.cfg.placement.solver {
        Solver::Exhaustive => solve_exhaustive(problem),
        Solver::Greedy => solve_greedy(problem),
        Solver::Mads => solve_mads(problem, &study.cfg.placement.mads),
    }
}

fn weighted_top(study: &Study, devices: &DeviceSet) -> Result<Vec<WeightedContingency>> {
    let list = study.n1();
    let rep = study.severity(devices, &list)?;
    if let Some(id) = &study.cfg.ecc.contingency {
        let si = rep.si(id).ok_or_else(|| Error::InvalidInput(format!("unknown contingency {id:?}")))?;
        return Ok(vec![WeightedContingency { contingency: list.get(id).expect("in list").clone(), weight: si }]);
    }
    Ok(rep
        .ranking
        .iter()
        .take(study.cfg.top_contingencies)
        .map(|id| WeightedContingency {
            contingency: list.get(id).expect("ranked").clone(),
            weight: rep.si(id).expect("ranked"),
        })
        .collect())
}

fn cmd_place(study: &Study, rebuild: bool, compare_vsi: bool) -> Result<Vec<String>> {
    let devices = study.devices()?;
    let v = study.cfg.placement.svcs;
    let l = study.net.candidate_buses.len();
    if v > l {
        return Err(Error::InvalidInput(format!("{v} SVCs requested but only {l} candidates")));
    }
    let (entries, mut lines) = covariances(study, &devices, rebuild)?;
    let problem = PlacementProblem::new(entries.clone(), v)?;
    let sol = solve(&problem, study)?;
    let path = study.write_json("placement.json", &sol)?;
    lines.push(format!(
        "{:?} selected {:?} (objective {:.6}, {} evaluations); wrote {}",
        sol.solver,
        sol.selected,
        sol.objective,
        sol.evaluations,
        path.display()
    ));
    if compare_vsi {
        let weighted = weighted_top(study, &devices)?;
        let vsi = vsi_rank(
            &study.net,
            &devices,
            &weighted,
            &study.net.candidate_buses,
            study.cfg.probe_mvar,
            study.cfg.clip_negative,
            &study.cfg.sim,
        )?;
        let target = study.study_contingency(&devices)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n_svc", "ecc_selected", "ecc_resolves", "vsi_selected", "vsi_resolves"])?;
        let mut rows = Vec::new();
        for n in 1..=v {
            let ecc_sel = solve(&PlacementProblem::new(entries.clone(), n)?, study)?.selected;
            let vsi_sel = vsi.top(n);
            let (er, vr) = (study.resolves(&devices, &target, &ecc_sel)?, study.resolves(&devices, &target, &vsi_sel)?);
            w.write_record([n.to_string(), join(&ecc_sel), er.to_string(), join(&vsi_sel), vr.to_string()])?;
            rows.push(json!({"n_svc": n, "ecc": ecc_sel, "ecc_resolves": er, "vsi": vsi_sel, "vsi_resolves": vr}));
        }
        study.write("comparison.csv", &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
        let p = study.write_json(
            "comparison.json",
            &json!({"contingency": target.id, "svc_rating": study.cfg.svc_rating, "rows": rows}),
        )?;
        lines.push(format!("comparison on {} written to {}", target.id, p.display()));
    }
    Ok(lines)
}

fn join(b: &[BusId]) -> String {
    b.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn cmd_vsi(study: &Study) -> Result<Vec<String>> {
    let devices = study.devices()?;
    let weighted = weighted_top(study, &devices)?;
    let vsi = vsi_rank(
        &study.net,
        &devices,
        &weighted,
        &study.net.candidate_buses,
        study.cfg.probe_mvar,
        study.cfg.clip_negative,
        &study.cfg.sim,
    )?;
    study.write("vsi.csv", vsi.to_csv()?.as_bytes())?;
    let weights: Vec<Value> =
        weighted.iter().map(|w| json!({"contingency": w.contingency.id, "si": w.weight})).collect();
    let path = study.write_json(
        "vsi.json",
        &json!({
            "ranking": vsi.ranking,
            "overall": vsi.overall,
            "candidates": vsi.candidates,
            "contingencies": weights,
            "probe_mvar": vsi.probe_mvar,
            "degenerate": vsi.degenerate,
            "diverged": vsi.diverged,
            "skipped": vsi.skipped,
            "clip_negative": vsi.clip_negative,
        }),
    )?;
    Ok(vec![format!("ranking {:?}; wrote {}", vsi.ranking, path.display())])
}

fn read_placement(dir: &Path) -> Result<Vec<BusId>> {
    let path = dir.join("placement.json");
    let text = std::fs::read_to_string(&path).map_err(|_| {
        Error::InvalidInput(format!("no --placement given and {} does not exist; run `place` first", path.display()))
    })?;
    let v: Value = serde_json::from_str(&text)?;
    serde_json::from_value(v["selected"].clone()).map_err(Error::from)
}

fn cmd_coverage(study: &Study, placement: Option<&[u32]>) -> Result<Vec<String>> {
    let devices = study.devices()?;
    let placed = match placement {
        Some(p) => p.to_vec(),
        None => read_placement(&study.out)?,
    };
    let cfg = &study.cfg;
    let screen = fidvr_filter(&study.n1(), &study.net, &devices, &cfg.criteria, &cfg.durations, &cfg.sim)?;
    let rep = coverage(
        &study.net,
        &devices,
        &placed,
        cfg.svc_rating,
        &screen.filtered,
        &cfg.criteria,
        &cfg.durations,
        &cfg.sim,
    )?;
    study.write("coverage.csv", rep.to_csv()?.as_bytes())?;
    let path = study.write_json("coverage.json", &rep)?;
    let parts: Vec<String> =
        rep.durations.iter().zip(&rep.counts).map(|(d, n)| format!("{d} cycles: {n}/{}", rep.n_cont_total)).collect();
    Ok(vec![format!("placement {:?}: {}; wrote {}", rep.placement, parts.join(", "), path.display())])
}

fn cmd_cost(
    cfg: StudyConfig,
    coverage: Option<PathBuf>,
    c_svc: Option<f64>,
    c_fidvr: Option<f64>,
    n_cont: Option<usize>,
) -> Result<Vec<String>> {
    let path = coverage
        .or(cfg.cost.coverage.clone())
        .ok_or_else(|| Error::InvalidInput("no coverage table given (use --coverage)".into()))?;
    let model = CostModel { c_svc: c_svc.unwrap_or(cfg.cost.c_svc), c_fidvr: c_fidvr.unwrap_or(cfg.cost.c_fidvr) };
    model.validate()?;
    let n_total = n_cont
        .or(cfg.cost.n_cont)
        .ok_or_else(|| Error::InvalidInput("the contingency total is required (use --n-cont)".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidInput(format!("cannot read coverage table {}: {e}", path.display())))?;
    let table = read_coverage_csv(&text, Some(n_total))?;
    let ((n_star, c_star), curve) = optimal_svc_count(&model, &table, n_total)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("varplace-out"));
    std::fs::create_dir_all(&out)?;
    crate::ecc::write_atomic(&out.join("cost_curve.csv"), write_cost_curve(&model, &curve)?.as_bytes())?;
    let body = json!({
        "model": model,
        "n_cont": n_total,
        "optimal_n_svc": n_star,
        "optimal_cost": c_star,
        "curve": curve,
        "provenance": {
            "tool": "varplace",
            "version": env!("CARGO_PKG_VERSION"),
            "coverage_sha256": sha256_hex(text.as_bytes()),
            "config_sha256": sha256_hex(cfg.canonical_json().as_bytes()),
            "seed": cfg.seed,
        },
    });
    let mut s = serde_json::to_string_pretty(&body)?;
    s.push('\n');
    crate::ecc::write_atomic(&out.join("cost.json"), s.as_bytes())?;
    Ok(vec![format!("optimal number of SVCs {n_star}, cost {} c_svc", c_star / model.c_svc)])
}
