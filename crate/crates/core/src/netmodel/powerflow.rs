use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{admittance_matrix, BusId, BusKind, Network};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<BusId>,
    pub v_mag: Vec<f64>,
    /// Radians, slack at zero.
    pub v_ang: Vec<f64>,
    pub converged: bool,
    /// Largest P/Q residual over non-slack buses, pu.
    pub max_mismatch: f64,
    pub iterations: usize,
}

impl PowerFlowSolution {
    pub fn voltages(&self) -> Vec<Complex64> {
        self.v_mag.iter().zip(&self.v_ang).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
    }

    /// Net complex power injected into the network at every bus, pu.
    pub fn injections(&self, net: &Network) -> Vec<Complex64> {
        let y = admittance_matrix(net);
        let v = DVector::from_vec(self.voltages());
        let current = &y * &v;
        v.iter().zip(current.iter()).map(|(v, i)| v * i.conj()).collect()
    }

    /// Complex generation at every bus (injection plus local load), pu.
    pub fn generation(&self, net: &Network) -> Vec<Complex64> {
        self.injections(net)
            .into_iter()
            .zip(&net.buses)
            .map(|(s, b)| s + Complex64::new(b.p_load, b.q_load) / net.base_mva)
            .collect()
    }
}

/// Newton-Raphson in polar coordinates from a flat start.
///
/// Buses in islands without the slack bus must carry no injection or shunt;
/// they are reported de-energized (|V| = 0). An island with injections makes
/// the problem singular.
pub fn solve_power_flow(net: &Network, tol: f64, max_iter: usize) -> Result<PowerFlowSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("power-flow tolerance must be positive, got {tol}")));
    }
    let n = net.n_bus();
    let slack = net.slack_index();
    let base = net.base_mva;

    let mut live = vec![false; n];
    for comp in net.components(&BTreeSet::new()) {
        if comp.contains(&slack) {
            for &i in &comp {
                live[i] = true;
            }
        } else {
            for &i in &comp {
                let b = &net.buses[i];
                if b.has_load() || b.p_gen != 0.0 || b.kind.is_generator() || b.g_shunt != 0.0 || b.b_shunt != 0.0 {
                    return Err(Error::SingularJacobian(format!(
                        "bus {} is islanded from the slack bus but carries injections",
                        b.id
                    )));
                }
            }
        }
    }

    let y = admittance_matrix(net);
    let sched: Vec<Complex64> =
        net.buses.iter().map(|b| Complex64::new(b.p_gen - b.p_load, -b.q_load) / base).collect();

    let pvpq: Vec<usize> = (0..n).filter(|&i| live[i] && net.buses[i].kind != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| live[i] && net.buses[i].kind == BusKind::Pq).collect();

    let mut vm: Vec<f64> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if !live[i] {
                0.0
            } else if b.kind == BusKind::Pq {
                1.0
            } else {
                b.v_setpoint
            }
        })
        .collect();
    let mut va = vec![0.0; n];

    let mismatch = |vm: &[f64], va: &[f64]| -> (Vec<Complex64>, Vec<Complex64>, DVector<f64>) {
        let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
        let vv = DVector::from_vec(v.clone());
        let ibus = &y * &vv;
        let mis: Vec<Complex64> = (0..n).map(|i| v[i] * ibus[i].conj() - sched[i]).collect();
        let mut f = DVector::zeros(pvpq.len() + pq.len());
        for (k, &i) in pvpq.iter().enumerate() {
            f[k] = mis[i].re;
        }
        for (k, &i) in pq.iter().enumerate() {
            f[pvpq.len() + k] = mis[i].im;
        }
        (v, ibus.iter().copied().collect(), f)
    };

    let (mut v, mut ibus, mut f) = mismatch(&vm, &va);
    let mut norm = f.amax();
    let mut iterations = 0;
    while !(norm <= tol) {
        if iterations >= max_iter || !norm.is_finite() || norm > 1e10 {
            return Err(Error::NonConvergence { iterations, mismatch: norm });
        }
        let jac = jacobian(&y, &v, &ibus, &pvpq, &pq);
        let dx =
            jac.lu().solve(&(-&f)).ok_or_else(|| Error::SingularJacobian("power-flow jacobian is singular".into()))?;
        if dx.iter().any(|d| !d.is_finite()) {
            return Err(Error::SingularJacobian("power-flow jacobian is singular".into()));
        }
        for (k, &i) in pvpq.iter().enumerate() {
            va[i] += dx[k];
        }
        for (k, &i) in pq.iter().enumerate() {
            vm[i] += dx[pvpq.len() + k];
        }
        iterations += 1;
        (v, ibus, f) = mismatch(&vm, &va);
        norm = f.amax();
    }

    // Angles relative to the slack bus (already zero), negative magnitudes never occur
    // from a flat start on the high-voltage branch, but keep them canonical anyway.
    for i in 0..n {
        if vm[i] < 0.0 {
            vm[i] = -vm[i];
            va[i] += std::f64::consts::PI;
        }
    }

    Ok(PowerFlowSolution {
        bus_ids: net.bus_ids(),
        v_mag: vm,
        v_ang: va,
        converged: true,
        max_mismatch: norm,
        iterations,
    })
}

fn jacobian(y: &DMatrix<Complex64>, v: &[Complex64], ibus: &[Complex64], pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
    let n = v.len();
    let j = Complex64::new(0.0, 1.0);
    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
    // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    let unit: Vec<Complex64> =
        v.iter().map(|&x| if x.norm() > 0.0 { x / x.norm() } else { Complex64::new(1.0, 0.0) }).collect();
    let mut ds_dva = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut ds_dvm = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for r in 0..n {
        for c in 0..n {
            let mut a = -y[(r, c)] * v[c];
            if r == c {
                a += ibus[r];
            }
            ds_dva[(r, c)] = j * v[r] * a.conj();
            let mut m = v[r] * (y[(r, c)] * unit[c]).conj();
            if r == c {
                m += ibus[r].conj() * unit[r];
            }
            ds_dvm[(r, c)] = m;
        }
    }
    let (npvpq, npq) = (pvpq.len(), pq.len());
    let mut jac = DMatrix::zeros(npvpq + npq, npvpq + npq);
    for (rk, &r) in pvpq.iter().enumerate() {
        for (ck, &c) in pvpq.iter().enumerate() {
            jac[(rk, ck)] = ds_dva[(r, c)].re;
        }
        for (ck, &c) in pq.iter().enumerate() {
            jac[(rk, npvpq + ck)] = ds_dvm[(r, c)].re;
        }
    }
    for (rk, &r) in pq.iter().enumerate() {
        for (ck, &c) in pvpq.iter().enumerate() {
            jac[(npvpq + rk, ck)] = ds_dva[(r, c)].im;
        }
        for (ck, &c) in pq.iter().enumerate() {
            jac[(npvpq + rk, npvpq + ck)] = ds_dvm[(r, c)].im;
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Branch, Bus};

    fn two_bus(p_mw: f64, q_mvar: f64) -> Network {
        let mut load = Bus::new(2, BusKind::Pq);
        load.p_load = p_mw;
        load.q_load = q_mvar;
        Network::new(vec![Bus::new(1, BusKind::Slack), load], vec![Branch::new(1, 1, 2, 0.0, 0.1)], 100.0, vec![2])
            .unwrap()
    }

    /// Larger root of |V|^4 + (2Qx - 1)|V|^2 + x^2 (P^2 + Q^2) = 0 for a
    /// lossless line from a 1 pu source.
    fn two_bus_closed_form(p: f64, q: f64, x: f64) -> Option<f64> {
        let b = 2.0 * q * x - 1.0;
        let c = x * x * (p * p + q * q);
        let disc = b * b - 4.0 * c;
        (disc >= 0.0).then(|| ((-b + disc.sqrt()) / 2.0).sqrt())
    }

    #[test]
    fn zero_injection_is_flat() {
        let net = Network::new(
            vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::Pv), Bus::new(3, BusKind::Pq)],
            vec![Branch::new(1, 1, 2, 0.01, 0.1), Branch::new(2, 2, 3, 0.0, 0.1), Branch::new(3, 1, 3, 0.0, 0.2)],
            100.0,
            vec![3],
        )
        .unwrap();
        let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(pf.iterations, 0);
        assert!(pf.converged);
        assert_eq!(pf.v_mag, vec![1.0, 1.0, 1.0]);
        assert_eq!(pf.v_ang, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_bus_matches_closed_form() {
        for &(p, q) in &[(100.0, 0.0), (150.0, 30.0), (50.0, -20.0)] {
            let net = two_bus(p, q);
            let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let expect = two_bus_closed_form(p / 100.0, q / 100.0, 0.1).unwrap();
            assert!((pf.v_mag[1] - expect).abs() < 1e-8, "P={p} Q={q}: {} vs {expect}", pf.v_mag[1]);
            assert!(pf.max_mismatch <= DEFAULT_TOL);
            assert_eq!(pf.v_ang[0], 0.0);
        }
        // P = 1 pu, Q = 0: |V|^2 = (1 + sqrt(0.96)) / 2
        let v = two_bus_closed_form(1.0, 0.0, 0.1).unwrap();
        assert!((v * v - (1.0 + 0.96f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn beyond_loadability_fails() {
        // Loadability of the lossless line at unity power factor is 1/(2x) = 5 pu.
        assert!(two_bus_closed_form(10.0, 0.0, 0.1).is_none());
        let net = two_bus(1000.0, 0.0);
        match solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Err(Error::NonConvergence { iterations, mismatch }) => {
                assert!(iterations > 0);
                assert!(mismatch > DEFAULT_TOL);
            }
            Err(Error::SingularJacobian(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn residual_reproduces_schedule() {
        let mut b2 = Bus::new(2, BusKind::Pv);
        b2.p_gen = 80.0;
        b2.v_setpoint = 1.02;
        let mut b3 = Bus::new(3, BusKind::Pq);
        b3.p_load = 120.0;
        b3.q_load = 40.0;
        b3.b_shunt = 10.0;
        let mut b4 = Bus::new(4, BusKind::Pq);
        b4.p_load = 60.0;
        b4.q_load = 15.0;
        let mut line = Branch::new(4, 3, 4, 0.01, 0.08);
        line.b_shunt = 0.05;
        let net = Network::new(
            vec![Bus::new(1, BusKind::Slack), b2, b3, b4],
            vec![
                Branch::new(1, 1, 2, 0.01, 0.1),
                Branch::new(2, 2, 3, 0.02, 0.12),
                Branch::new(3, 1, 3, 0.01, 0.15),
                line,
            ],
            100.0,
            vec![3, 4],
        )
        .unwrap();
        let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let s = pf.injections(&net);
        for (i, b) in net.buses.iter().enumerate() {
            if b.kind == BusKind::Slack {
                continue;
            }
            assert!((s[i].re - (b.p_gen - b.p_load) / 100.0).abs() <= DEFAULT_TOL);
            if b.kind == BusKind::Pq {
                assert!((s[i].im + b.q_load / 100.0).abs() <= DEFAULT_TOL);
            } else {
                assert!((pf.v_mag[i] - b.v_setpoint).abs() < 1e-15);
            }
        }
        let again = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(pf, again);
    }

    #[test]
    fn dead_island_without_injection() {
        let net = Network {
            buses: vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::Pq), Bus::new(3, BusKind::Pq)],
            branches: vec![Branch::new(1, 1, 2, 0.0, 0.1)],
            base_mva: 100.0,
            frequency_hz: 60.0,
            candidate_buses: vec![2, 3],
            dynamics: Default::default(),
        };
        let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(pf.v_mag[2], 0.0);

        let mut loaded = net.clone();
        loaded.buses[2].p_load = 10.0;
        assert!(matches!(solve_power_flow(&loaded, DEFAULT_TOL, DEFAULT_MAX_ITER), Err(Error::SingularJacobian(_))));
    }
}
