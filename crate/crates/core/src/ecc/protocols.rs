use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    empirical_covariance, Baseline, CovarianceMatrix, Direction, ExcitationPlan, PerturbedRun, Reference, Shape,
};
use crate::dynsim::{simulate, ContingencySpec, DeviceSet, InjectionSchedule, SimConfig, Trajectory, Waveform};
use crate::error::{Error, Result};
use crate::netmodel::{BusId, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EccMode {
    FaultSpecified { contingency: ContingencySpec },
    FaultUnspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEcc {
    pub bus: BusId,
    pub covariance: CovarianceMatrix,
    pub runs: usize,
    /// Sizes (Mvar) whose perturbed run diverged and was used up to the failure time.
    pub diverged_sizes: Vec<f64>,
}

fn checked_baseline(traj: Trajectory) -> Result<Trajectory> {
    if let crate::dynsim::SimStatus::Diverged { time, reason } = &traj.status {
        return Err(Error::Diverged { time: *time, reason: format!("baseline run: {reason}") });
    }
    Ok(traj)
}

fn baseline_run(net: &Network, devices: &DeviceSet, mode: &EccMode, cfg: &SimConfig) -> Result<Trajectory> {
    match mode {
        EccMode::FaultSpecified { contingency } => {
            checked_baseline(simulate(net, devices, Some(contingency), &[], cfg)?)
        }
        EccMode::FaultUnspecified => checked_baseline(simulate(net, devices, None, &[], cfg)?),
    }
}

fn check_plan(mode: &EccMode, plan: &ExcitationPlan, cfg: &SimConfig) -> Result<()> {
    plan.validate()?;
    match (mode, &plan.shape) {
        (EccMode::FaultSpecified { .. }, Shape::StepSchedule) => {
            if plan.directions.iter().any(|d| *d != Direction::Positive) {
                return Err(Error::InvalidInput("installed SVCs only support the +I direction".into()));
            }
            Ok(())
        }
        (EccMode::FaultUnspecified, Shape::Pulse { t2, .. }) => {
            if *t2 > cfg.t_f {
                return Err(Error::InvalidInput(format!("pulse end {t2} s is beyond t_f = {} s", cfg.t_f)));
            }
            Ok(())
        }
        (EccMode::FaultSpecified { .. }, _) => {
            Err(Error::InvalidInput("the fault-specified protocol needs the step-schedule shape".into()))
        }
        (EccMode::FaultUnspecified, _) => {
            Err(Error::InvalidInput("the fault-unspecified protocol needs the pulse shape".into()))
        }
    }
}

fn candidate_ecc(
    net: &Network,
    devices: &DeviceSet,
    mode: &EccMode,
    baseline: &Trajectory,
    candidate: BusId,
    plan: &ExcitationPlan,
    cfg: &SimConfig,
) -> Result<CandidateEcc> {
    if net.index_of(candidate).is_none() {
        return Err(Error::InvalidInput(format!("candidate bus {candidate} is not in the network")));
    }
    let contingency = match mode {
        EccMode::FaultSpecified { contingency } => Some(contingency),
        EccMode::FaultUnspecified => None,
    };
    let mut runs = Vec::new();
    let mut diverged_sizes = Vec::new();
    for (l, dir) in plan.directions.iter().enumerate() {
        for (m, &c) in plan.sizes.iter().enumerate() {
            let schedule = match plan.shape {
                Shape::StepSchedule => InjectionSchedule::svc(candidate, c),
                Shape::Pulse { t1, t2 } => {
                    // −I on the reactive load is an injection of +c
                    let q = -dir.sign() * c;
                    InjectionSchedule::open_loop(candidate, Waveform::Pulse { q1: q, q2: q, t1, t2 })
                }
                Shape::Impulse => unreachable!("rejected by check_plan"),
            };
            let trajectory = simulate(net, devices, contingency, &[schedule], cfg)?;
            if trajectory.is_diverged() {
                diverged_sizes.push(c);
            }
            let output = trajectory.svc_q.first().map(|s| s.values.clone());
            runs.push(PerturbedRun { input: 0, direction: l, size: m, trajectory, output });
        }
    }
    let v0 = devices.v0();
    let reference = match plan.reference {
        Reference::FaultedBaseline => Baseline::Pointwise(baseline),
        Reference::PreDisturbance => Baseline::Constant(&v0),
    };
    let covariance = empirical_covariance(reference, &runs, plan)?;
    Ok(CandidateEcc { bus: candidate, covariance, runs: runs.len(), diverged_sizes })
}

/// W_i for one candidate under a fault: one baseline run without var
/// support plus one run per capacity with an SVC of that rating at the candidate.
pub fn ecc_fault_specified(
    net: &Network,
    devices: &DeviceSet,
    contingency: &ContingencySpec,
    candidate: BusId,
    plan: &ExcitationPlan,
    cfg: &SimConfig,
) -> Result<CandidateEcc> {
    let mode = EccMode::FaultSpecified { contingency: contingency.clone() };
    check_plan(&mode, plan, cfg)?;
    let baseline = baseline_run(net, devices, &mode, cfg)?;
    candidate_ecc(net, devices, &mode, &baseline, candidate, plan, cfg)
}

/// W_i for one candidate without a fault: reactive-load pulses of every size.
pub fn ecc_fault_unspecified(
    net: &Network,
    devices: &DeviceSet,
    candidate: BusId,
    plan: &ExcitationPlan,
    cfg: &SimConfig,
) -> Result<CandidateEcc> {
    let mode = EccMode::FaultUnspecified;
    check_plan(&mode, plan, cfg)?;
    let baseline = baseline_run(net, devices, &mode, cfg)?;
    candidate_ecc(net, devices, &mode, &baseline, candidate, plan, cfg)
}

/// Per-candidate covariances for a whole candidate list, sharing one
/// baseline run. Candidates are processed in parallel; results keep the
/// order of `candidates`.
pub fn build_covariances(
    net: &Network,
    devices: &DeviceSet,
    mode: &EccMode,
    plan: &ExcitationPlan,
    candidates: &[BusId],
    cfg: &SimConfig,
) -> Result<Vec<CandidateEcc>> {
    check_plan(mode, plan, cfg)?;
    let baseline = baseline_run(net, devices, mode, cfg)?;
    candidates.par_iter().map(|&c| candidate_ecc(net, devices, mode, &baseline, c, plan, cfg)).collect()
}
