//! Fixed-step phasor simulation.
//!
//! The network is algebraic and is solved at every grid point; generators,
//! recovery loads and SVCs are integrated between grid points with the
//! network voltage held at its value from the start of the step.

mod devices;
mod engine;
mod network;
mod schedule;
mod trajectory;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{BusId, Network};

pub use devices::{initialize_dynamics, DeviceSet, GeneratorModel, RecoveryLoadModel, SvcDevice, V_BREAK};
pub use engine::simulate;
pub use schedule::{evaluate_schedule, step, InjectionMode, InjectionSchedule, Waveform};
pub use trajectory::{DeviceSeries, SimStatus, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Trapezoidal,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_f: f64,
    pub integrator: Integrator,
    /// Max current mismatch of the algebraic solve, pu.
    pub network_solve_tol: f64,
    /// Fault onset, seconds.
    pub fault_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 240.0,
            t_f: 5.0,
            integrator: Integrator::Trapezoidal,
            network_solve_tol: 1e-10,
            fault_time: 0.1,
        }
    }
}

impl SimConfig {
    /// Number of steps K with K·dt = t_f.
    pub fn n_steps(&self) -> usize {
        (self.t_f / self.dt).round() as usize
    }

    pub fn validate(&self, frequency_hz: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.t_f > 0.0 && self.dt.is_finite() && self.t_f.is_finite()) {
            return Err(Error::InvalidInput("dt and t_f must be positive".into()));
        }
        let k = self.t_f / self.dt;
        if (k - k.round()).abs() > 1e-6 * k.max(1.0) {
            return Err(Error::InvalidInput(format!("dt = {} does not divide t_f = {}", self.dt, self.t_f)));
        }
        if self.dt > 0.5 / frequency_hz + 1e-15 {
            return Err(Error::InvalidInput(format!("dt = {} exceeds half a cycle", self.dt)));
        }
        if !(self.network_solve_tol > 0.0) {
            return Err(Error::InvalidInput("network_solve_tol must be positive".into()));
        }
        if !(self.fault_time >= 0.0) {
            return Err(Error::InvalidInput("fault_time must be non-negative".into()));
        }
        Ok(())
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenLoss {
    pub bus: BusId,
    /// Fraction of the unit tripped at clearing, in (0, 1].
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContingencySpec {
    pub id: String,
    pub fault_bus: BusId,
    pub faulted_branch: u32,
    /// Cycles at the network frequency.
    pub fault_duration: f64,
    /// Shunt admittance applied at the fault bus during the fault, pu.
    #[serde(default = "default_fault_admittance")]
    pub fault_admittance: Complex64,
    #[serde(default)]
    pub gen_loss: Option<GenLoss>,
}

pub fn default_fault_admittance() -> Complex64 {
    Complex64::new(0.0, -1e4)
}

impl ContingencySpec {
    pub fn new(id: impl Into<String>, fault_bus: BusId, faulted_branch: u32, cycles: f64) -> Self {
        ContingencySpec {
            id: id.into(),
            fault_bus,
            faulted_branch,
            fault_duration: cycles,
            fault_admittance: default_fault_admittance(),
            gen_loss: None,
        }
    }

    pub fn with_duration(&self, cycles: f64) -> Self {
        ContingencySpec { fault_duration: cycles, ..self.clone() }
    }

    pub fn clearing_time(&self, cfg: &SimConfig, frequency_hz: f64) -> f64 {
        cfg.fault_time + self.fault_duration / frequency_hz
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.fault_duration > 0.0) {
            return Err(Error::InvalidInput(format!("contingency {}: fault duration must be positive", self.id)));
        }
        if net.index_of(self.fault_bus).is_none() {
            return Err(Error::InvalidInput(format!("contingency {}: unknown fault bus {}", self.id, self.fault_bus)));
        }
        match net.branch(self.faulted_branch) {
            None => {
                return Err(Error::InvalidInput(format!(
                    "contingency {}: unknown branch {}",
                    self.id, self.faulted_branch
                )))
            }
            Some(br) if !br.touches(self.fault_bus) => {
                return Err(Error::InvalidInput(format!(
                    "contingency {}: branch {} is not incident to bus {}",
                    self.id, self.faulted_branch, self.fault_bus
                )))
            }
            _ => {}
        }
        if let Some(g) = &self.gen_loss {
            let ok = net.bus(g.bus).map(|b| b.kind.is_generator()).unwrap_or(false);
            if !ok || !(g.fraction > 0.0 && g.fraction <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "contingency {}: gen_loss needs a generator bus and a fraction in (0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}
