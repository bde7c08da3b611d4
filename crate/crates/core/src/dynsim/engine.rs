use std::collections::BTreeSet;

use num_complex::Complex64;

use super::devices::{power_term, DeviceSet};
use super::network::NetworkPhase;
use super::schedule::{InjectionMode, InjectionSchedule, Waveform};
use super::trajectory::{DeviceSeries, SimStatus, Trajectory};
use super::{ContingencySpec, SimConfig};
use crate::error::{Error, Result};
use crate::netmodel::Network;

const EVENT_EPS: f64 = 1e-9;
const V_LIMIT: f64 = 10.0;

fn event_step(t: f64, dt: f64) -> usize {
    ((t - EVENT_EPS) / dt).ceil().max(0.0) as usize
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    PreFault,
    Fault,
    Cleared,
}

/// Runs one fixed-step simulation from the equilibrium held in `devices`.
///
/// Events take effect at the first grid point at or after their time. A
/// failed network solve or non-finite state ends the run early with a
/// diverged status instead of an error.
pub fn simulate(
    net: &Network,
    devices: &DeviceSet,
    contingency: Option<&ContingencySpec>,
    schedules: &[InjectionSchedule],
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate(net.frequency_hz)?;
    if devices.bus_ids != net.bus_ids() {
        return Err(Error::InvalidInput("device set was initialized for a different network".into()));
    }
    if let Some(c) = contingency {
        c.validate(net)?;
    }

    let mut dev = devices.clone();
    let mut open_loop: Vec<(usize, &Waveform, usize)> = Vec::new();
    let mut injection_q = Vec::new();
    let mut svc_q = Vec::new();
    for s in schedules {
        let idx =
            net.index_of(s.bus).ok_or_else(|| Error::InvalidInput(format!("schedule at undefined bus {}", s.bus)))?;
        match &s.mode {
            InjectionMode::Device { rating } => {
                dev.svcs.push(dev.svc_device(net, s.bus, *rating)?);
                svc_q.push(DeviceSeries { bus: s.bus, label: s.label(), values: Vec::new() });
            }
            InjectionMode::OpenLoop { waveform } => {
                if !waveform.peak().is_finite() {
                    return Err(Error::InvalidInput(format!("schedule at bus {} is unbounded", s.bus)));
                }
                open_loop.push((idx, waveform, injection_q.len()));
                injection_q.push(DeviceSeries { bus: s.bus, label: s.label(), values: Vec::new() });
            }
        }
    }

    let k_steps = cfg.n_steps();
    let (fault_on, fault_off) = match contingency {
        Some(c) => {
            let on = event_step(cfg.fault_time, cfg.dt);
            (on, event_step(c.clearing_time(cfg, net.frequency_hz), cfg.dt).max(on + 1))
        }
        None => (usize::MAX, usize::MAX),
    };
    let fault_idx = contingency.map(|c| net.index_of(c.fault_bus).expect("validated"));

    let n = net.n_bus();
    let base = net.base_mva;
    let mut v = dev.v_init.clone();
    let mut q_open = vec![0.0; n];
    let mut traj = Trajectory {
        bus_ids: net.bus_ids(),
        dt: cfg.dt,
        times: Vec::with_capacity(k_steps + 1),
        v_mag: Vec::with_capacity(k_steps + 1),
        svc_q,
        injection_q,
        status: SimStatus::Completed,
        contingency: contingency.map(|c| c.id.clone()),
        schedules: schedules.iter().map(|s| s.label()).collect(),
    };

    let mut phase = None;
    let mut solver: Option<NetworkPhase> = None;
    for step in 0..=k_steps {
        let t = cfg.time(step);
        let now = if step >= fault_off {
            Phase::Cleared
        } else if step >= fault_on {
            Phase::Fault
        } else {
            Phase::PreFault
        };
        if phase != Some(now) {
            let c = contingency;
            if now == Phase::Cleared {
                if let Some(loss) = c.and_then(|c| c.gen_loss.as_ref()) {
                    for g in dev.generators.iter_mut().filter(|g| g.bus == loss.bus) {
                        g.online = (1.0 - loss.fraction).max(0.0);
                    }
                }
            }
            let open: BTreeSet<u32> = match (now, c) {
                (Phase::Cleared, Some(c)) => BTreeSet::from([c.faulted_branch]),
                _ => BTreeSet::new(),
            };
            let fault = match (now, c) {
                (Phase::Fault, Some(c)) => Some((fault_idx.unwrap(), c.fault_admittance)),
                _ => None,
            };
            solver = Some(NetworkPhase::new(net, &dev, &open, fault));
            phase = Some(now);
        }
        let ph = solver.as_ref().unwrap();

        for q in q_open.iter_mut() {
            *q = 0.0;
        }
        for &(idx, w, _) in &open_loop {
            q_open[idx] += w.value(t + EVENT_EPS) / base;
        }

        if let Err(reason) = ph.solve(&dev, &q_open, &mut v, cfg.network_solve_tol) {
            traj.status = SimStatus::Diverged { time: t, reason };
            break;
        }
        let mags: Vec<f64> = v.iter().map(|x| x.norm()).collect();
        if mags.iter().any(|m| !m.is_finite() || *m > V_LIMIT) {
            traj.status = SimStatus::Diverged { time: t, reason: "bus voltage left the admissible range".into() };
            break;
        }
        let states_finite = dev.generators.iter().all(|g| g.delta.is_finite() && g.omega.is_finite())
            && dev.loads.iter().all(|l| l.xp.is_finite() && l.xq.is_finite())
            && dev.svcs.iter().all(|s| s.b.is_finite());
        if !states_finite {
            traj.status = SimStatus::Diverged { time: t, reason: "device state became non-finite".into() };
            break;
        }

        traj.times.push(t);
        for (series, svc) in traj.svc_q.iter_mut().zip(&dev.svcs) {
            series.values.push(svc.output_mvar(mags[svc.index]));
        }
        for &(idx, _, slot) in &open_loop {
            let delivered = q_open[idx] * power_term(mags[idx], 1.0, 0.0).0 * base;
            traj.injection_q[slot].values.push(delivered);
        }
        traj.v_mag.push(mags);

        if step == k_steps {
            break;
        }
        advance_devices(&mut dev, &v, cfg);
    }
    Ok(traj)
}

fn advance_devices(dev: &mut DeviceSet, v: &[Complex64], cfg: &SimConfig) {
    let omega_b = dev.omega_b;
    for g in dev.generators.iter_mut() {
        g.advance(v[g.index], omega_b, cfg.dt, cfg.integrator);
    }
    for l in dev.loads.iter_mut() {
        let m = v[l.index].norm();
        if m > 0.0 {
            l.advance(m, cfg.dt, cfg.integrator);
        }
    }
    for s in dev.svcs.iter_mut() {
        let m = v[s.index].norm();
        s.observe(m);
        s.advance(m, cfg.dt, cfg.integrator);
    }
}
