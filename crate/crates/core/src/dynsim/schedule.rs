use serde::{Deserialize, Serialize};

use crate::netmodel::BusId;

/// Unit step with S(0) = 1.
pub fn step(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Waveform {
    /// Σ ΔQ_k·S(t − t_k); `steps` holds (t_k, ΔQ_k) in seconds and Mvar.
    Steps { steps: Vec<(f64, f64)> },
    /// Q1·S(t − t1) − Q2·S(t − t2).
    Pulse { q1: f64, q2: f64, t1: f64, t2: f64 },
}

impl Waveform {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Steps { steps } => steps.iter().map(|&(tk, dq)| dq * step(t - tk)).sum(),
            Waveform::Pulse { q1, q2, t1, t2 } => q1 * step(t - t1) - q2 * step(t - t2),
        }
    }

    /// Largest |Q| the waveform can reach.
    pub fn peak(&self) -> f64 {
        match self {
            Waveform::Steps { steps } => {
                let mut sorted = steps.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc: f64 = 0.0;
                let mut peak: f64 = 0.0;
                for (_, dq) in sorted {
                    acc += dq;
                    peak = peak.max(acc.abs());
                }
                peak
            }
            Waveform::Pulse { q1, q2, .. } => q1.abs().max((q1 - q2).abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InjectionMode {
    /// Closed-loop SVC with the given rating, Mvar.
    Device { rating: f64 },
    /// Prescribed reactive injection, Mvar (positive = injection into the bus).
    OpenLoop { waveform: Waveform },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSchedule {
    pub bus: BusId,
    #[serde(flatten)]
    pub mode: InjectionMode,
}

impl InjectionSchedule {
    pub fn svc(bus: BusId, rating: f64) -> Self {
        InjectionSchedule { bus, mode: InjectionMode::Device { rating } }
    }

    pub fn open_loop(bus: BusId, waveform: Waveform) -> Self {
        InjectionSchedule { bus, mode: InjectionMode::OpenLoop { waveform } }
    }

    pub fn label(&self) -> String {
        match &self.mode {
            InjectionMode::Device { rating } => format!("svc@{}:{}Mvar", self.bus, rating),
            InjectionMode::OpenLoop { waveform: Waveform::Pulse { q1, q2, t1, t2 } } => {
                format!("pulse@{}:{q1}/{q2}Mvar[{t1},{t2})", self.bus)
            }
            InjectionMode::OpenLoop { waveform: Waveform::Steps { steps } } => {
                let parts: Vec<String> = steps.iter().map(|(t, q)| format!("{q}Mvar@{t}")).collect();
                format!("steps@{}:{}", self.bus, parts.join(","))
            }
        }
    }
}

/// Prescribed injection at time `t`, Mvar. Closed-loop devices have no
/// prescribed value and evaluate to zero.
pub fn evaluate_schedule(schedule: &InjectionSchedule, t: f64) -> f64 {
    match &schedule.mode {
        InjectionMode::Device { .. } => 0.0,
        InjectionMode::OpenLoop { waveform } => waveform.value(t),
    }
}
