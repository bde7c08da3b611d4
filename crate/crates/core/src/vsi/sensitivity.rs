use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsim::{simulate, ContingencySpec, DeviceSet, InjectionSchedule, SimConfig, Trajectory, Waveform};
use crate::error::{Error, Result};
use crate::netmodel::{BusId, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedContingency {
    pub contingency: ContingencySpec,
    /// Severity SI_k.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsiResult {
    pub candidates: Vec<BusId>,
    pub contingencies: Vec<String>,
    pub probe_mvar: f64,
    /// `per_bus[k][i][j]`: max_t (V_new − V_old) / q at bus j, pu per Mvar.
    pub per_bus: Vec<Vec<Vec<f64>>>,
    /// `normalized[k][i]`
    pub normalized: Vec<Vec<f64>>,
    /// Σ_k SI_k · normalized[k][i]
    pub overall: Vec<f64>,
    /// Candidate ids by overall index descending, ties by id.
    pub ranking: Vec<BusId>,
    /// (contingency, candidate) pairs whose probe run diverged.
    pub diverged: Vec<(String, BusId)>,
    /// Contingencies whose base run diverged; they contribute nothing.
    pub skipped: Vec<String>,
    /// True when no candidate had a positive index.
    pub degenerate: bool,
    pub clip_negative: bool,
}

impl VsiResult {
    /// The first `v` candidates of the ranking, sorted by id.
    pub fn top(&self, v: usize) -> Vec<BusId> {
        let mut s: Vec<BusId> = self.ranking.iter().take(v).copied().collect();
        s.sort_unstable();
        s
    }

    pub fn index_of(&self, bus: BusId) -> Option<f64> {
        self.candidates.iter().position(|&c| c == bus).map(|i| self.overall[i])
    }

    /// `candidate,vsi,<contingency...>` with the per-contingency normalized values.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["candidate".to_string(), "vsi".to_string()];
        header.extend(self.contingencies.iter().cloned());
        w.write_record(&header)?;
        for (i, c) in self.candidates.iter().enumerate() {
            let mut row = vec![c.to_string(), self.overall[i].to_string()];
            row.extend(self.normalized.iter().map(|k| k[i].to_string()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn max_gain(new: &Trajectory, old: &Trajectory, j: usize, q: f64) -> f64 {
    new.v_mag.iter().zip(&old.v_mag).map(|(a, b)| (a[j] - b[j]) / q).fold(f64::NEG_INFINITY, f64::max)
}

/// Voltage sensitivity index of every candidate.
///
/// For each contingency, a constant reactive injection of `probe_mvar` is
/// switched on at each candidate when the fault clears. The per-bus index is
/// the largest voltage gain per Mvar over the run; bus averages are
/// normalized by the best candidate and weighted by the contingency severity.
pub fn vsi_rank(
    net: &Network,
    devices: &DeviceSet,
    contingencies: &[WeightedContingency],
    candidates: &[BusId],
    probe_mvar: f64,
    clip_negative: bool,
    cfg: &SimConfig,
) -> Result<VsiResult> {
    if !(probe_mvar > 0.0 && probe_mvar.is_finite()) {
        return Err(Error::InvalidInput(format!("probe size must be positive, got {probe_mvar}")));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidates to rank".into()));
    }
    for &c in candidates {
        if net.index_of(c).is_none() {
            return Err(Error::InvalidInput(format!("candidate bus {c} is not in the network")));
        }
    }
    if let Some(w) = contingencies.iter().find(|w| !(w.weight >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative severity weight for {}", w.contingency.id)));
    }
    let n_bus = net.n_bus();
    let n_cand = candidates.len();

    let bases: Vec<Trajectory> = contingencies
        .par_iter()
        .map(|w| simulate(net, devices, Some(&w.contingency), &[], cfg))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..contingencies.len()).flat_map(|k| (0..n_cand).map(move |i| (k, i))).collect();
    let probes: Vec<Option<Trajectory>> = pairs
        .par_iter()
        .map(|&(k, i)| {
            if bases[k].is_diverged() {
                return Ok(None);
            }
            let c = &contingencies[k].contingency;
            let t_clear = c.clearing_time(cfg, net.frequency_hz);
            let probe =
                InjectionSchedule::open_loop(candidates[i], Waveform::Steps { steps: vec![(t_clear, probe_mvar)] });
            simulate(net, devices, Some(c), &[probe], cfg).map(Some)
        })
        .collect::<Result<_>>()?;

    let mut per_bus = vec![vec![vec![0.0; n_bus]; n_cand]; contingencies.len()];
    let mut normalized = vec![vec![0.0; n_cand]; contingencies.len()];
    let mut diverged = Vec::new();
    let mut skipped = Vec::new();
    for (k, w) in contingencies.iter().enumerate() {
        if bases[k].is_diverged() {
            skipped.push(w.contingency.id.clone());
            continue;
        }
        let mut avg = vec![0.0; n_cand];
        for i in 0..n_cand {
            let traj = probes[k * n_cand + i].as_ref().expect("base converged");
            if traj.is_diverged() {
                diverged.push((w.contingency.id.clone(), candidates[i]));
                continue;
            }
            for j in 0..n_bus {
                let mut g = max_gain(traj, &bases[k], j, probe_mvar);
                if clip_negative {
                    g = g.max(0.0);
                }
                per_bus[k][i][j] = g;
            }
            avg[i] = per_bus[k][i].iter().sum::<f64>() / n_bus as f64;
        }
        let best = avg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if best > 0.0 {
            for i in 0..n_cand {
                normalized[k][i] = avg[i] / best;
            }
        }
    }
    let overall: Vec<f64> =
        (0..n_cand).map(|i| contingencies.iter().enumerate().map(|(k, w)| w.weight * normalized[k][i]).sum()).collect();
    let degenerate = !overall.iter().any(|&x| x > 0.0);
    let mut order: Vec<usize> = (0..n_cand).collect();
    order.sort_by(|&a, &b| overall[b].total_cmp(&overall[a]).then(candidates[a].cmp(&candidates[b])));
    Ok(VsiResult {
        candidates: candidates.to_vec(),
        contingencies: contingencies.iter().map(|w| w.contingency.id.clone()).collect(),
        probe_mvar,
        per_bus,
        normalized,
        ranking: order.into_iter().map(|i| candidates[i]).collect(),
        overall,
        diverged,
        skipped,
        degenerate,
        clip_negative,
    })
}
