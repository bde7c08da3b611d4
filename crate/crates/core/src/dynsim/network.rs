use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::devices::{power_term, DeviceSet};
use crate::netmodel::{admittance_matrix_excluding, Network};

/// Admittance and energization for one topology phase of a run.
pub(crate) struct NetworkPhase {
    y: DMatrix<Complex64>,
    live: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl NetworkPhase {
    pub fn new(net: &Network, devices: &DeviceSet, open: &BTreeSet<u32>, fault: Option<(usize, Complex64)>) -> Self {
        let mut y = admittance_matrix_excluding(net, open);
        for g in devices.generators.iter().filter(|g| g.online > 0.0) {
            y[(g.index, g.index)] += g.norton_admittance();
        }
        if let Some((i, yf)) = fault {
            y[(i, i)] += yf;
        }
        let n = net.n_bus();
        let mut sourced = vec![false; n];
        for g in devices.generators.iter().filter(|g| g.online > 0.0) {
            sourced[g.index] = true;
        }
        let mut energized = vec![false; n];
        for comp in net.components(open) {
            if comp.iter().any(|&i| sourced[i]) {
                for &i in &comp {
                    energized[i] = true;
                }
            }
        }
        let live: Vec<usize> = (0..n).filter(|&i| energized[i]).collect();
        let mut pos = vec![None; n];
        for (k, &i) in live.iter().enumerate() {
            pos[i] = Some(k);
        }
        NetworkPhase { y, live, pos }
    }

    pub fn is_live(&self, i: usize) -> bool {
        self.pos[i].is_some()
    }

    /// Drawn complex power (P + jQ) at bus i and its derivative in |V|.
    fn bus_demand(devices: &DeviceSet, open_loop_q: &[f64], i: usize, m: f64) -> (Complex64, Complex64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        for l in devices.loads.iter().filter(|l| l.index == i) {
            let (p, dp, q, dq) = l.demand(m);
            s += Complex64::new(p, q);
            ds += Complex64::new(dp, dq);
        }
        for svc in devices.svcs.iter().filter(|s| s.index == i) {
            let (q, dq) = svc.injection(m);
            s -= Complex64::new(0.0, q);
            ds -= Complex64::new(0.0, dq);
        }
        if open_loop_q[i] != 0.0 {
            let (k, dk) = power_term(m, 1.0, 0.0);
            s -= Complex64::new(0.0, open_loop_q[i] * k);
            ds -= Complex64::new(0.0, open_loop_q[i] * dk);
        }
        (s, ds)
    }

    /// Newton solve in rectangular coordinates. `v` holds the initial guess
    /// and receives the solution; de-energized buses are set to zero.
    pub fn solve(
        &self,
        devices: &DeviceSet,
        open_loop_q: &[f64],
        v: &mut [Complex64],
        tol: f64,
    ) -> std::result::Result<usize, String> {
        let n = v.len();
        for i in 0..n {
            if !self.is_live(i) {
                v[i] = Complex64::new(0.0, 0.0);
            } else if v[i].norm() < 1e-6 {
                v[i] = Complex64::new(1e-3, 0.0);
            }
        }
        let nl = self.live.len();
        if nl == 0 {
            return Ok(0);
        }
        let mut source = vec![Complex64::new(0.0, 0.0); n];
        for g in devices.generators.iter().filter(|g| g.online > 0.0) {
            source[g.index] += g.norton_current();
        }

        for iter in 0..=30 {
            let mut f = DVector::zeros(2 * nl);
            let mut jac = DMatrix::zeros(2 * nl, 2 * nl);
            for (r, &i) in self.live.iter().enumerate() {
                let mut acc = -source[i];
                for (c, &j) in self.live.iter().enumerate() {
                    let yij = self.y[(i, j)];
                    if yij == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    acc += yij * v[j];
                    jac[(r, c)] += yij.re;
                    jac[(r, nl + c)] -= yij.im;
                    jac[(nl + r, c)] += yij.im;
                    jac[(nl + r, nl + c)] += yij.re;
                }
                let m = v[i].norm().max(1e-9);
                let (s, ds) = Self::bus_demand(devices, open_loop_q, i, m);
                if s != Complex64::new(0.0, 0.0) || ds != Complex64::new(0.0, 0.0) {
                    let g = s.conj() / (m * m);
                    let dg = ds.conj() / (m * m) - 2.0 * s.conj() / (m * m * m);
                    acc += g * v[i];
                    let (vr, vi) = (v[i].re, v[i].im);
                    // d(g(m)·V)/dVr and /dVi with dm/dVr = vr/m, dm/dVi = vi/m
                    let dv = dg * v[i];
                    jac[(r, r)] += g.re + dv.re * vr / m;
                    jac[(r, nl + r)] += -g.im + dv.re * vi / m;
                    jac[(nl + r, r)] += g.im + dv.im * vr / m;
                    jac[(nl + r, nl + r)] += g.re + dv.im * vi / m;
                }
                f[r] = acc.re;
                f[nl + r] = acc.im;
            }
            let norm = f.amax();
            if !norm.is_finite() {
                return Err("network solve produced non-finite residual".into());
            }
            if norm <= tol {
                return Ok(iter);
            }
            if iter == 30 {
                return Err(format!("network solve did not converge (mismatch {norm:.3e} pu)"));
            }
            let dx = jac.lu().solve(&f).ok_or_else(|| "singular network jacobian".to_string())?;
            for (k, &i) in self.live.iter().enumerate() {
                v[i] -= Complex64::new(dx[k], dx[nl + k]);
            }
        }
        unreachable!()
    }
}
