#![allow(dead_code)]

use varplace::dynsim::{initialize_dynamics, DeviceSet, SimConfig};
use varplace::netmodel::{load_case, solve_power_flow, Network, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub fn setup(text: &str) -> (Network, DeviceSet) {
    let net = load_case(text).unwrap();
    let pf = solve_power_flow(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let dev = initialize_dynamics(&net, &pf).unwrap();
    (net, dev)
}

pub fn fidvr() -> (Network, DeviceSet) {
    setup(varplace::fixtures::FIDVR_8BUS)
}

pub fn short_cfg(t_f: f64) -> SimConfig {
    SimConfig { t_f, ..SimConfig::default() }
}

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varplace::ecc::LinearSystem;

/// A = −(M Mᵀ + αI) + (S − Sᵀ): every eigenvalue has real part ≤ −α.
pub fn random_hurwitz(seed: u64, n: usize, v: usize) -> LinearSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let alpha = rng.random_range(0.3..1.0);
    let a = -(&m * m.transpose() + DMatrix::identity(n, n) * alpha) + (&s - s.transpose());
    let b = DMatrix::from_fn(n, v, |_, _| rng.random_range(-1.0..1.0));
    LinearSystem::new(a, b).unwrap()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
