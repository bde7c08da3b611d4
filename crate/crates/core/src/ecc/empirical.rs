use nalgebra::DMatrix;

use super::{CovarianceMatrix, ExcitationPlan, Weighting};
use crate::dynsim::Trajectory;
use crate::error::{Error, Result};
use crate::netmodel::BusId;

/// Reference state x0 subtracted from every perturbed run.
#[derive(Debug, Clone, Copy)]
pub enum Baseline<'a> {
    /// Point-by-point reference run on the same grid.
    Pointwise(&'a Trajectory),
    /// Constant state, one entry per trajectory column.
    Constant(&'a [f64]),
}

/// One perturbed run tagged with its input i, direction l and size m.
#[derive(Debug, Clone)]
pub struct PerturbedRun {
    pub input: usize,
    pub direction: usize,
    pub size: usize,
    pub trajectory: Trajectory,
    /// Instantaneous input magnitude per sample, used by
    /// [`Weighting::InstantaneousOutput`].
    pub output: Option<Vec<f64>>,
}

fn columns(bus_ids: &[BusId], monitored: &Option<Vec<BusId>>) -> Result<(Vec<BusId>, Vec<usize>)> {
    match monitored {
        None => Ok((bus_ids.to_vec(), (0..bus_ids.len()).collect())),
        Some(list) => {
            let mut ids = list.clone();
            ids.sort_unstable();
            ids.dedup();
            let cols = ids
                .iter()
                .map(|b| {
                    bus_ids
                        .iter()
                        .position(|x| x == b)
                        .ok_or_else(|| Error::InvalidInput(format!("monitored bus {b} not in trajectory")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((ids, cols))
        }
    }
}

/// W = Σ_{i,l,m} w · Σ_{k=0}^{K−1} (x_k − x0_k)(x_k − x0_k)ᵀ Δt.
///
/// Contributions are accumulated per input and the per-input matrices are
/// then added in input order, so summing the results of disjoint input sets
/// reproduces the joint result exactly. A perturbed run that ended early
/// contributes the samples it has.
pub fn empirical_covariance(
    baseline: Baseline<'_>,
    perturbed: &[PerturbedRun],
    plan: &ExcitationPlan,
) -> Result<CovarianceMatrix> {
    plan.validate()?;
    let (ref_ids, ref_dt, ref_len) = match baseline {
        Baseline::Pointwise(t) => {
            if t.is_diverged() {
                return Err(Error::Diverged {
                    time: *t.times.last().unwrap_or(&0.0),
                    reason: "baseline run diverged".into(),
                });
            }
            (Some(&t.bus_ids), Some(t.dt), t.n_samples())
        }
        Baseline::Constant(_) => (None, None, usize::MAX),
    };
    let bus_ids = match (ref_ids, perturbed.first()) {
        (Some(ids), _) => ids.clone(),
        (None, Some(run)) => run.trajectory.bus_ids.clone(),
        (None, None) => return Err(Error::InvalidInput("no perturbed runs and no reference grid".into())),
    };
    if let Baseline::Constant(x0) = baseline {
        if x0.len() != bus_ids.len() {
            return Err(Error::GridMismatch(format!(
                "reference state has {} entries, trajectories have {} columns",
                x0.len(),
                bus_ids.len()
            )));
        }
    }
    let (index, cols) = columns(&bus_ids, &plan.monitored)?;
    let n = cols.len();
    let dt = ref_dt.or(perturbed.first().map(|r| r.trajectory.dt)).unwrap();
    let r = plan.r() as f64;
    let s = plan.s() as f64;

    for run in perturbed {
        let t = &run.trajectory;
        if t.bus_ids != bus_ids || t.dt.to_bits() != dt.to_bits() {
            return Err(Error::GridMismatch(format!(
                "run (input {}, direction {}, size {}) is on a different grid",
                run.input, run.direction, run.size
            )));
        }
        if run.direction >= plan.r() || run.size >= plan.s() {
            return Err(Error::InvalidInput(format!(
                "run tag (direction {}, size {}) outside the plan",
                run.direction, run.size
            )));
        }
        if plan.weighting == Weighting::InstantaneousOutput && run.output.is_none() {
            return Err(Error::InvalidInput("instantaneous weighting needs an output series per run".into()));
        }
    }

    let mut inputs: Vec<usize> = perturbed.iter().map(|r| r.input).collect();
    inputs.sort_unstable();
    inputs.dedup();

    let mut total = DMatrix::<f64>::zeros(n, n);
    let mut d = vec![0.0; n];
    for &input in &inputs {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for run in perturbed.iter().filter(|r| r.input == input) {
            let t = &run.trajectory;
            // left rectangle over [0, t_f): samples 0..K-1 of the K+1 recorded
            // (a diverged run covers [0, t_fail) with every sample it recorded)
            let recorded = t.n_samples().min(ref_len);
            let usable = if t.is_diverged() { recorded } else { recorded.saturating_sub(1) };
            let c = plan.sizes[run.size];
            for k in 0..usable {
                let w = match plan.weighting {
                    Weighting::Size => dt / (r * s * c * c),
                    Weighting::InstantaneousOutput => {
                        let q = run.output.as_ref().unwrap()[k];
                        if q == 0.0 {
                            continue;
                        }
                        dt / (r * s * q * q)
                    }
                };
                let row = &t.v_mag[k];
                for (a, &j) in cols.iter().enumerate() {
                    let x0 = match baseline {
                        Baseline::Pointwise(b) => b.v_mag[k][j],
                        Baseline::Constant(x0) => x0[j],
                    };
                    d[a] = row[j] - x0;
                }
                for a in 0..n {
                    if d[a] == 0.0 {
                        continue;
                    }
                    let wa = w * d[a];
                    for b in a..n {
                        acc[(a, b)] += wa * d[b];
                    }
                }
            }
        }
        for a in 0..n {
            for b in a..n {
                total[(a, b)] += acc[(a, b)];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            total[(a, b)] = total[(b, a)];
        }
    }
    Ok(CovarianceMatrix { bus_index: index, matrix: total })
}
