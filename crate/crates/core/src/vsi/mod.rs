//! Post-fault voltage criteria, contingency severity and the voltage
//! sensitivity index used as the comparison baseline for placement.

mod sensitivity;

use serde::{Deserialize, Serialize};

use crate::dynsim::Trajectory;
use crate::error::{Error, Result};
use crate::netmodel::BusKind;

pub use sensitivity::{vsi_rank, VsiResult, WeightedContingency};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaSpec {
    /// Largest dip allowed at load buses during the transient window.
    pub load_dip_max: f64,
    /// Largest dip allowed at generator buses during the transient window.
    pub gen_dip_max: f64,
    pub sustained_dip: f64,
    /// A dip beyond `sustained_dip` may last at most this many cycles.
    pub sustained_cycles: f64,
    pub post_transient_dev: f64,
    /// Seconds from simulation start after which the post-transient band applies.
    pub transient_window: f64,
    /// Check the post-transient band as 1 ± dev pu instead of relative to V⁰.
    pub absolute_band: bool,
}

impl Default for CriteriaSpec {
    fn default() -> Self {
        CriteriaSpec {
            load_dip_max: 0.25,
            gen_dip_max: 0.30,
            sustained_dip: 0.20,
            sustained_cycles: 20.0,
            post_transient_dev: 0.05,
            transient_window: 3.0,
            absolute_band: false,
        }
    }
}

impl CriteriaSpec {
    pub fn validate(&self, t_f: f64) -> Result<()> {
        for (name, v) in [
            ("load_dip_max", self.load_dip_max),
            ("gen_dip_max", self.gen_dip_max),
            ("sustained_dip", self.sustained_dip),
            ("post_transient_dev", self.post_transient_dev),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(self.sustained_cycles > 0.0) {
            return Err(Error::InvalidInput("sustained_cycles must be positive".into()));
        }
        if !(self.transient_window > 0.0 && self.transient_window < t_f) {
            return Err(Error::InvalidInput(format!(
                "transient_window = {} must lie in (0, t_f = {t_f})",
                self.transient_window
            )));
        }
        Ok(())
    }
}

/// R[k][j] = |V[k][j] − V⁰_j| / V⁰_j
pub fn deviation_ratio(traj: &Trajectory, pre_fault: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_pre_fault(traj, pre_fault)?;
    Ok(traj.v_mag.iter().map(|row| row.iter().zip(pre_fault).map(|(v, v0)| (v - v0).abs() / v0).collect()).collect())
}

fn check_pre_fault(traj: &Trajectory, pre_fault: &[f64]) -> Result<()> {
    if pre_fault.len() != traj.bus_ids.len() {
        return Err(Error::InvalidInput(format!(
            "{} pre-fault voltages for {} buses",
            pre_fault.len(),
            traj.bus_ids.len()
        )));
    }
    if let Some(j) = pre_fault.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("pre-fault voltage at bus {} is not positive", traj.bus_ids[j])));
    }
    Ok(())
}

/// Bits in [`ViolationFlags::flags`].
pub const CRIT_TRANSIENT_DIP: u8 = 1;
pub const CRIT_SUSTAINED_DIP: u8 = 2;
pub const CRIT_POST_TRANSIENT: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationFlags {
    /// `flags[k][j]`: bitwise or of the `CRIT_*` constants for sample k, bus j.
    pub flags: Vec<Vec<u8>>,
}

impl ViolationFlags {
    pub fn any(&self) -> bool {
        self.flags.iter().flatten().any(|&f| f != 0)
    }

    /// Union of all criteria that fired anywhere.
    pub fn criteria(&self) -> u8 {
        self.flags.iter().flatten().fold(0, |a, &f| a | f)
    }

    pub fn count(&self, criterion: u8) -> usize {
        self.flags.iter().flatten().filter(|&&f| f & criterion != 0).count()
    }
}

/// Flags each sample and bus against the three criteria.
///
/// (a) dip beyond the load or generator limit between clearing and
/// clearing + `transient_window`; (b) dip beyond `sustained_dip` for a
/// contiguous run strictly longer than `sustained_cycles`, counted from
/// clearing; (c) deviation beyond `post_transient_dev` after
/// `transient_window` seconds from the start of the run.
pub fn check_criteria(
    traj: &Trajectory,
    pre_fault: &[f64],
    spec: &CriteriaSpec,
    kinds: &[BusKind],
    clearing_time: f64,
    frequency_hz: f64,
) -> Result<ViolationFlags> {
    check_pre_fault(traj, pre_fault)?;
    if kinds.len() != traj.bus_ids.len() {
        return Err(Error::InvalidInput("one bus kind per trajectory bus is required".into()));
    }
    let n_bus = traj.bus_ids.len();
    let n = traj.n_samples();
    let mut flags = vec![vec![0u8; n_bus]; n];
    let max_run = spec.sustained_cycles / frequency_hz;
    for j in 0..n_bus {
        let v0 = pre_fault[j];
        let dip_max = if kinds[j].is_generator() { spec.gen_dip_max } else { spec.load_dip_max };
        let mut run_start: Option<usize> = None;
        for k in 0..n {
            let t = traj.times[k];
            let v = traj.v_mag[k][j];
            let dip = (v0 - v) / v0;
            let after_clear = t >= clearing_time - TIME_EPS;
            if after_clear && t <= clearing_time + spec.transient_window + TIME_EPS && dip > dip_max {
                flags[k][j] |= CRIT_TRANSIENT_DIP;
            }
            if t > spec.transient_window + TIME_EPS {
                let out = if spec.absolute_band {
                    (v - 1.0).abs() > spec.post_transient_dev
                } else {
                    (v - v0).abs() / v0 > spec.post_transient_dev
                };
                if out {
                    flags[k][j] |= CRIT_POST_TRANSIENT;
                }
            }
            let low = after_clear && dip > spec.sustained_dip;
            match (low, run_start) {
                (true, None) => run_start = Some(k),
                (false, Some(s)) => {
                    mark_run(&mut flags, j, s, k, traj.dt, max_run);
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            mark_run(&mut flags, j, s, n, traj.dt, max_run);
        }
    }
    Ok(ViolationFlags { flags })
}

/// Samples s..end each stand for one step, so the run lasts (end − s)·dt.
fn mark_run(flags: &mut [Vec<u8>], j: usize, s: usize, end: usize, dt: f64, max_run: f64) {
    if (end - s) as f64 * dt > max_run + TIME_EPS {
        for row in &mut flags[s..end] {
            row[j] |= CRIT_SUSTAINED_DIP;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityEntry {
    pub contingency: String,
    pub si: f64,
    /// Union of violated criteria, as `CRIT_*` bits.
    pub criteria: u8,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityReport {
    /// Input order.
    pub entries: Vec<SeverityEntry>,
    /// Contingency ids by SI descending, ties by id.
    pub ranking: Vec<String>,
    #[serde(skip)]
    pub flags: Vec<ViolationFlags>,
}

/// Input to [`severity_rank`]: one simulated contingency.
#[derive(Debug, Clone, Copy)]
pub struct ContingencyRun<'a> {
    pub id: &'a str,
    pub trajectory: &'a Trajectory,
    pub clearing_time: f64,
}

/// SI_k = (1/T) Σ_t (1/N) Σ_j SI_kj^t over samples 1..=K, where SI_kj^t is
/// the deviation ratio at flagged points and zero elsewhere. Samples lost
/// to a diverged run count as full collapse (ratio 1, flagged).
pub fn severity_rank(
    runs: &[ContingencyRun<'_>],
    pre_fault: &[f64],
    spec: &CriteriaSpec,
    kinds: &[BusKind],
    n_samples: usize,
    frequency_hz: f64,
) -> Result<SeverityReport> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("severity needs at least two samples".into()));
    }
    let mut entries = Vec::with_capacity(runs.len());
    let mut all_flags = Vec::with_capacity(runs.len());
    for run in runs {
        let traj = run.trajectory;
        if traj.n_samples() > n_samples {
            return Err(Error::GridMismatch(format!(
                "contingency {} has {} samples, expected at most {n_samples}",
                run.id,
                traj.n_samples()
            )));
        }
        let flags = check_criteria(traj, pre_fault, spec, kinds, run.clearing_time, frequency_hz)?;
        let r = deviation_ratio(traj, pre_fault)?;
        let n_bus = traj.bus_ids.len() as f64;
        let mut total = 0.0;
        for k in 1..traj.n_samples() {
            let row: f64 = (0..r[k].len()).filter(|&j| flags.flags[k][j] != 0).map(|j| r[k][j]).sum();
            total += row / n_bus;
        }
        let diverged = traj.is_diverged();
        let mut criteria = flags.criteria();
        if diverged {
            total += (n_samples - traj.n_samples().max(1)) as f64;
            criteria |= CRIT_TRANSIENT_DIP | CRIT_SUSTAINED_DIP | CRIT_POST_TRANSIENT;
        }
        entries.push(SeverityEntry {
            contingency: run.id.to_string(),
            si: total / (n_samples - 1) as f64,
            criteria,
            diverged,
        });
        all_flags.push(flags);
    }
    let mut order: Vec<&SeverityEntry> = entries.iter().collect();
    order.sort_by(|a, b| b.si.total_cmp(&a.si).then_with(|| a.contingency.cmp(&b.contingency)));
    let ranking = order.into_iter().map(|e| e.contingency.clone()).collect();
    Ok(SeverityReport { entries, ranking, flags: all_flags })
}

impl SeverityReport {
    pub fn si(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.contingency == id).map(|e| e.si)
    }

    /// `contingency,si,criteria,diverged`
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["contingency", "si", "criteria", "diverged"])?;
        for e in &self.entries {
            w.write_record([
                e.contingency.clone(),
                e.si.to_string(),
                criteria_label(e.criteria),
                e.diverged.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// "a", "ab", "abc" or "-".
pub fn criteria_label(bits: u8) -> String {
    let s: String = [(CRIT_TRANSIENT_DIP, 'a'), (CRIT_SUSTAINED_DIP, 'b'), (CRIT_POST_TRANSIENT, 'c')]
        .iter()
        .filter(|(b, _)| bits & b != 0)
        .map(|(_, c)| *c)
        .collect();
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsim::SimStatus;

    const F: f64 = 60.0;
    const DT: f64 = 1.0 / 240.0;

    fn traj(cols: &[Vec<f64>]) -> Trajectory {
        let n = cols[0].len();
        Trajectory {
            bus_ids: (1..=cols.len() as u32).collect(),
            dt: DT,
            times: (0..n).map(|k| k as f64 * DT).collect(),
            v_mag: (0..n).map(|k| cols.iter().map(|c| c[k]).collect()).collect(),
            svc_q: vec![],
            injection_q: vec![],
            status: SimStatus::Completed,
            contingency: None,
            schedules: vec![],
        }
    }

    fn flat(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn ratio_examples() {
        let t = traj(&[vec![0.9, 1.0, 1.05]]);
        let r = deviation_ratio(&t, &[1.0]).unwrap();
        assert!((r[0][0] - 0.1).abs() < 1e-15);
        assert_eq!(r[1][0], 0.0);
        assert!((r[2][0] - 0.05).abs() < 1e-15);
        assert!(deviation_ratio(&t, &[0.0]).is_err());
    }

    #[test]
    fn pinned_load_bus_violates_transient_dip() {
        let mut v = flat(1201);
        for x in v.iter_mut().skip(30).take(100) {
            *x = 0.70;
        }
        let f = check_criteria(&traj(&[v]), &[1.0], &CriteriaSpec::default(), &[BusKind::Pq], 0.1, F).unwrap();
        assert!(f.criteria() & CRIT_TRANSIENT_DIP != 0);
        let f_gen = check_criteria(
            &traj(&[vec![1.0; 30].into_iter().chain(vec![0.72; 10]).chain(vec![1.0; 1161]).collect()]),
            &[1.0],
            &CriteriaSpec::default(),
            &[BusKind::Pv],
            0.1,
            F,
        )
        .unwrap();
        assert!(!f_gen.any());
    }

    #[test]
    fn sustained_boundary_is_strict() {
        let spec = CriteriaSpec::default();
        let per_cycle = 4;
        for (samples, expected) in [(20 * per_cycle, false), (20 * per_cycle + 1, true), (10 * per_cycle, false)] {
            let mut v = flat(1201);
            for x in v.iter_mut().skip(40).take(samples) {
                *x = 0.79;
            }
            let f = check_criteria(&traj(&[v]), &[1.0], &spec, &[BusKind::Pq], 0.1, F).unwrap();
            assert_eq!(f.criteria() & CRIT_SUSTAINED_DIP != 0, expected, "{samples}");
            assert_eq!(f.criteria() & !CRIT_SUSTAINED_DIP, 0);
        }
    }

    #[test]
    fn post_transient_only_after_window() {
        let mut v = flat(1201);
        for (k, x) in v.iter_mut().enumerate() {
            if k > 400 {
                *x = 0.94;
            }
        }
        let f = check_criteria(&traj(&[v.clone()]), &[1.0], &CriteriaSpec::default(), &[BusKind::Pq], 0.1, F).unwrap();
        assert_eq!(f.criteria(), CRIT_POST_TRANSIENT);
        assert_eq!(f.count(CRIT_POST_TRANSIENT), 1200 - 720);
        let band = CriteriaSpec { absolute_band: true, ..CriteriaSpec::default() };
        let g = check_criteria(&traj(&[v]), &[0.97], &band, &[BusKind::Pq], 0.1, F).unwrap();
        assert_eq!(g.criteria(), CRIT_POST_TRANSIENT);
    }

    #[test]
    fn severity_of_half_violating_bus() {
        let n = 1201;
        let mut v = flat(n);
        for x in v.iter_mut().skip(601) {
            *x = 0.9;
        }
        let t = traj(&[v, flat(n), flat(n), flat(n)]);
        let spec = CriteriaSpec { transient_window: 2.5, ..CriteriaSpec::default() };
        let kinds = [BusKind::Pq; 4];
        let runs = [ContingencyRun { id: "c1", trajectory: &t, clearing_time: 0.1 }];
        let rep = severity_rank(&runs, &[1.0; 4], &spec, &kinds, n, F).unwrap();
        assert!((rep.entries[0].si - 0.0125).abs() < 1e-12, "{}", rep.entries[0].si);
    }

    #[test]
    fn flat_runs_have_zero_severity_and_id_order() {
        let t = traj(&[flat(1201), flat(1201)]);
        let runs = [
            ContingencyRun { id: "b", trajectory: &t, clearing_time: 0.1 },
            ContingencyRun { id: "a", trajectory: &t, clearing_time: 0.1 },
        ];
        let rep = severity_rank(&runs, &[1.0, 1.0], &CriteriaSpec::default(), &[BusKind::Pq; 2], 1201, F).unwrap();
        assert!(rep.entries.iter().all(|e| e.si == 0.0 && e.criteria == 0));
        assert_eq!(rep.ranking, vec!["a", "b"]);
        assert!(rep.to_csv().unwrap().contains("b,0,-,false"));
    }

    #[test]
    fn spec_validation() {
        assert!(CriteriaSpec::default().validate(5.0).is_ok());
        assert!(CriteriaSpec::default().validate(2.0).is_err());
        assert!(CriteriaSpec { load_dip_max: 1.2, ..CriteriaSpec::default() }.validate(5.0).is_err());
    }
}
