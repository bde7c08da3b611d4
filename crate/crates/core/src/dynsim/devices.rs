use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Integrator;
use crate::error::{Error, Result};
use crate::netmodel::{BusId, Network, PowerFlowSolution};

/// Below this magnitude (pu) every voltage-dependent term turns into a
/// constant impedance so the algebraic solve stays well posed near a fault.
pub const V_BREAK: f64 = 0.5;

/// (value, d/dm) of (m/v0)^alpha with the low-voltage taper.
pub(crate) fn power_term(m: f64, v0: f64, alpha: f64) -> (f64, f64) {
    if m >= V_BREAK || alpha >= 2.0 {
        let val = (m / v0).powf(alpha);
        let der = if m > 0.0 { alpha * val / m } else { 0.0 };
        (val, der)
    } else {
        let k = (V_BREAK / v0).powf(alpha) / (V_BREAK * V_BREAK);
        (k * m * m, 2.0 * k * m)
    }
}

fn taper(m: f64) -> (f64, f64) {
    if m >= V_BREAK {
        (1.0, 0.0)
    } else {
        (m * m / (V_BREAK * V_BREAK), 2.0 * m / (V_BREAK * V_BREAK))
    }
}

/// Exact trapezoidal / RK4 step of T·ẋ = u − x with constant u.
fn linear_lag(x: f64, u: f64, t: f64, h: f64, integrator: Integrator) -> f64 {
    match integrator {
        Integrator::Trapezoidal => {
            let a = h / (2.0 * t);
            (x * (1.0 - a) + 2.0 * a * u) / (1.0 + a)
        }
        Integrator::Rk4 => {
            let f = |x: f64| (u - x) / t;
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub bus: BusId,
    pub(crate) index: usize,
    pub h: f64,
    pub d: f64,
    pub xd_prime: f64,
    pub e_prime: f64,
    /// Mechanical power per unit of the online machine, pu.
    pub pm: f64,
    pub delta: f64,
    pub omega: f64,
    /// Online fraction of the unit; a partial trip scales its network
    /// equivalent while the per-unit dynamics stay unchanged.
    pub online: f64,
}

impl GeneratorModel {
    /// Norton source current into the bus.
    pub fn norton_current(&self) -> Complex64 {
        self.online * Complex64::from_polar(self.e_prime, self.delta) / Complex64::new(0.0, self.xd_prime)
    }

    pub fn norton_admittance(&self) -> Complex64 {
        self.online / Complex64::new(0.0, self.xd_prime)
    }

    pub fn electrical_power(&self, v: Complex64) -> f64 {
        self.e_prime * v.norm() * (self.delta - v.arg()).sin() / self.xd_prime
    }

    fn accel(&self, delta: f64, omega: f64, c: f64, theta: f64) -> f64 {
        (self.pm - c * (delta - theta).sin() - self.d * omega) / (2.0 * self.h)
    }

    pub fn derivatives(&self, v: Complex64, omega_b: f64) -> [f64; 2] {
        let c = self.e_prime * v.norm() / self.xd_prime;
        [omega_b * self.omega, self.accel(self.delta, self.omega, c, v.arg())]
    }

    pub(crate) fn advance(&mut self, v: Complex64, omega_b: f64, h: f64, integrator: Integrator) {
        if self.online <= 0.0 {
            return;
        }
        let c = self.e_prime * v.norm() / self.xd_prime;
        let theta = v.arg();
        let (d0, w0) = (self.delta, self.omega);
        match integrator {
            Integrator::Rk4 => {
                let f = |d: f64, w: f64| (omega_b * w, self.accel(d, w, c, theta));
                let k1 = f(d0, w0);
                let k2 = f(d0 + 0.5 * h * k1.0, w0 + 0.5 * h * k1.1);
                let k3 = f(d0 + 0.5 * h * k2.0, w0 + 0.5 * h * k2.1);
                let k4 = f(d0 + h * k3.0, w0 + h * k3.1);
                self.delta = d0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                self.omega = w0 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            }
            Integrator::Trapezoidal => {
                let f0 = self.accel(d0, w0, c, theta);
                let (mut d1, mut w1) = (d0 + h * omega_b * w0, w0 + h * f0);
                for _ in 0..20 {
                    let r1 = d1 - d0 - 0.5 * h * omega_b * (w0 + w1);
                    let r2 = w1 - w0 - 0.5 * h * (f0 + self.accel(d1, w1, c, theta));
                    let j11 = 1.0;
                    let j12 = -0.5 * h * omega_b;
                    let j21 = 0.5 * h * c * (d1 - theta).cos() / (2.0 * self.h);
                    let j22 = 1.0 + 0.5 * h * self.d / (2.0 * self.h);
                    let det = j11 * j22 - j12 * j21;
                    let dd = (r1 * j22 - j12 * r2) / det;
                    let dw = (j11 * r2 - j21 * r1) / det;
                    d1 -= dd;
                    w1 -= dw;
                    if dd.abs() < 1e-14 && dw.abs() < 1e-14 {
                        break;
                    }
                }
                self.delta = d1;
                self.omega = w1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryLoadModel {
    pub bus: BusId,
    pub(crate) index: usize,
    pub static_fraction: f64,
    pub alpha_t: f64,
    pub alpha_s: f64,
    pub tp: f64,
    pub tq: f64,
    /// Pre-disturbance voltage magnitude, pu.
    pub v0: f64,
    /// Scheduled load at v0, pu.
    pub p0: f64,
    pub q0: f64,
    pub xp: f64,
    pub xq: f64,
}

impl RecoveryLoadModel {
    fn dynamic_share(&self) -> f64 {
        1.0 - self.static_fraction
    }

    /// Delivered (P, dP/dm, Q, dQ/dm) at magnitude m, pu.
    pub fn demand(&self, m: f64) -> (f64, f64, f64, f64) {
        let z = power_term(m, self.v0, 2.0);
        let t = power_term(m, self.v0, self.alpha_t);
        let tp = taper(m);
        let pd0 = self.dynamic_share() * self.p0;
        let qd0 = self.dynamic_share() * self.q0;
        let sp = self.static_fraction * self.p0;
        let sq = self.static_fraction * self.q0;
        (
            sp * z.0 + self.xp * tp.0 + pd0 * t.0,
            sp * z.1 + self.xp * tp.1 + pd0 * t.1,
            sq * z.0 + self.xq * tp.0 + qd0 * t.0,
            sq * z.1 + self.xq * tp.1 + qd0 * t.1,
        )
    }

    fn recovery_drive(&self, m: f64) -> (f64, f64) {
        let r = m / self.v0;
        let gap = r.powf(self.alpha_s) - r.powf(self.alpha_t);
        (self.dynamic_share() * self.p0 * gap, self.dynamic_share() * self.q0 * gap)
    }

    pub fn derivatives(&self, m: f64) -> [f64; 2] {
        let (up, uq) = self.recovery_drive(m);
        [(up - self.xp) / self.tp, (uq - self.xq) / self.tq]
    }

    pub(crate) fn advance(&mut self, m: f64, h: f64, integrator: Integrator) {
        let (up, uq) = self.recovery_drive(m);
        self.xp = linear_lag(self.xp, up, self.tp, h, integrator);
        self.xq = linear_lag(self.xq, uq, self.tq, h, integrator);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcDevice {
    pub bus: BusId,
    pub(crate) index: usize,
    /// Mvar
    pub rating: f64,
    /// pu
    pub b_max: f64,
    pub tr: f64,
    pub kr: f64,
    pub v_ref: f64,
    pub deadband: f64,
    pub b: f64,
    pub active: bool,
    pub(crate) base_mva: f64,
}

impl SvcDevice {
    /// Injected Q (pu) and its derivative in m; limited to the rating.
    pub fn injection(&self, m: f64) -> (f64, f64) {
        let cap = self.rating / self.base_mva;
        let q = self.b * m * m;
        if q > cap {
            (cap, 0.0)
        } else if q < -cap {
            (-cap, 0.0)
        } else {
            (q, 2.0 * self.b * m)
        }
    }

    pub fn output_mvar(&self, m: f64) -> f64 {
        self.injection(m).0 * self.base_mva
    }

    pub fn derivative(&self, m: f64) -> f64 {
        if self.active {
            (self.kr * (self.v_ref - m) - self.b) / self.tr
        } else {
            0.0
        }
    }

    pub(crate) fn observe(&mut self, m: f64) {
        if !self.active && (m - self.v_ref).abs() > self.deadband {
            self.active = true;
        }
    }

    pub(crate) fn advance(&mut self, m: f64, h: f64, integrator: Integrator) {
        if !self.active {
            return;
        }
        let b = linear_lag(self.b, self.kr * (self.v_ref - m), self.tr, h, integrator);
        self.b = b.clamp(-self.b_max, self.b_max);
    }
}

/// Initialized generators and loads for one operating point. SVCs are added
/// per simulation from injection schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSet {
    pub bus_ids: Vec<BusId>,
    pub generators: Vec<GeneratorModel>,
    pub loads: Vec<RecoveryLoadModel>,
    pub svcs: Vec<SvcDevice>,
    /// Power-flow voltages.
    pub v_init: Vec<Complex64>,
    pub base_mva: f64,
    pub omega_b: f64,
}

impl DeviceSet {
    pub fn v0(&self) -> Vec<f64> {
        self.v_init.iter().map(|v| v.norm()).collect()
    }

    pub fn svc_device(&self, net: &Network, bus: BusId, rating: f64) -> Result<SvcDevice> {
        let index = net.index_of(bus).ok_or_else(|| Error::InvalidInput(format!("svc at undefined bus {bus}")))?;
        if !(rating > 0.0 && rating.is_finite()) {
            return Err(Error::InvalidInput(format!("svc at bus {bus}: rating must be positive")));
        }
        let p = net.dynamics.svc(bus);
        let v0 = self.v_init[index].norm();
        Ok(SvcDevice {
            bus,
            index,
            rating,
            b_max: rating / self.base_mva,
            tr: p.tr,
            kr: p.kr,
            v_ref: p.v_ref.unwrap_or(v0),
            deadband: p.deadband,
            b: 0.0,
            active: false,
            base_mva: self.base_mva,
        })
    }

    /// Largest |ẋ| over all device states at the power-flow voltages.
    pub fn max_initial_derivative(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for g in &self.generators {
            for d in g.derivatives(self.v_init[g.index], self.omega_b) {
                worst = worst.max(d.abs());
            }
        }
        for l in &self.loads {
            for d in l.derivatives(self.v_init[l.index].norm()) {
                worst = worst.max(d.abs());
            }
        }
        for s in &self.svcs {
            worst = worst.max(s.derivative(self.v_init[s.index].norm()).abs());
        }
        worst
    }
}

/// Builds the generator and recovery-load states at the power-flow point.
/// Every slack and PV bus hosts a generator; every bus with scheduled load
/// hosts a recovery load.
pub fn initialize_dynamics(net: &Network, pf: &PowerFlowSolution) -> Result<DeviceSet> {
    if !pf.converged || pf.bus_ids != net.bus_ids() {
        return Err(Error::InvalidInput("power-flow solution does not belong to this network".into()));
    }
    for g in &net.dynamics.generators {
        match net.bus(g.bus) {
            None => return Err(Error::InvalidInput(format!("generator at undefined bus {}", g.bus))),
            Some(b) if !b.kind.is_generator() => {
                return Err(Error::InvalidInput(format!("generator at PQ bus {}", g.bus)))
            }
            _ => {}
        }
    }
    for l in &net.dynamics.loads {
        if net.bus(l.bus).is_none() {
            return Err(Error::InvalidInput(format!("load model at undefined bus {}", l.bus)));
        }
    }
    let v = pf.voltages();
    let sgen = pf.generation(net);
    let base = net.base_mva;
    let mut generators = Vec::new();
    let mut loads = Vec::new();
    for (i, bus) in net.buses.iter().enumerate() {
        if bus.kind.is_generator() && v[i].norm() > 0.0 {
            let p = net.dynamics.generator(bus.id);
            let current = (sgen[i] / v[i]).conj();
            let e = v[i] + Complex64::new(0.0, p.xd_prime) * current;
            let mut g = GeneratorModel {
                bus: bus.id,
                index: i,
                h: p.h,
                d: p.d,
                xd_prime: p.xd_prime,
                e_prime: e.norm(),
                pm: 0.0,
                delta: e.arg(),
                omega: 0.0,
                online: 1.0,
            };
            g.pm = g.electrical_power(v[i]);
            generators.push(g);
        }
        if bus.has_load() && v[i].norm() > 0.0 {
            let p = net.dynamics.load(bus.id);
            loads.push(RecoveryLoadModel {
                bus: bus.id,
                index: i,
                static_fraction: p.static_fraction,
                alpha_t: p.alpha_t,
                alpha_s: p.alpha_s,
                tp: p.tp,
                tq: p.tq,
                v0: v[i].norm(),
                p0: bus.p_load / base,
                q0: bus.q_load / base,
                xp: 0.0,
                xq: 0.0,
            });
        }
    }
    Ok(DeviceSet {
        bus_ids: net.bus_ids(),
        generators,
        loads,
        svcs: Vec::new(),
        v_init: v,
        base_mva: base,
        omega_b: 2.0 * std::f64::consts::PI * net.frequency_hz,
    })
}
