use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{empirical_covariance, Baseline, CovarianceMatrix, ExcitationPlan, PerturbedRun, Shape};
use crate::dynsim::{SimStatus, Trajectory};
use crate::error::{Error, Result};

/// ẋ = A x + B u
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.nrows() || a.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Largest real part over the eigenvalues of A.
    pub fn spectral_abscissa(&self) -> f64 {
        self.a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// 1 / min |Re λ|, the slowest time constant.
    pub fn slowest_time_constant(&self) -> f64 {
        let slowest = self.a.complex_eigenvalues().iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        1.0 / slowest
    }
}

/// Solves A W + W Aᵀ + B Bᵀ = 0 through (I⊗A + A⊗I) vec(W) = −vec(B Bᵀ).
pub fn analytic_gramian(sys: &LinearSystem) -> Result<CovarianceMatrix> {
    let max_real = sys.spectral_abscissa();
    if !(max_real < 0.0) {
        return Err(Error::NotHurwitz { max_real });
    }
    let n = sys.n();
    if n > 50 {
        return Err(Error::InvalidInput(format!("dense gramian solve limited to n <= 50, got {n}")));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(&sys.a) + sys.a.kronecker(&eye);
    let q = &sys.b * sys.b.transpose();
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = k.lu().solve(&rhs).ok_or_else(|| Error::SingularJacobian("Lyapunov operator is singular".into()))?;
    let w = DMatrix::from_column_slice(n, n, sol.as_slice());
    let w = (&w + w.transpose()) * 0.5;
    Ok(CovarianceMatrix { bus_index: (1..=n as u32).collect(), matrix: w })
}

/// Exact zero-order-hold response to a one-step rectangle of area `area` on
/// input `input`, from x(0) = 0. Columns of the returned trajectory are the
/// states, labelled 1..=n.
pub fn simulate_linear_impulse(sys: &LinearSystem, input: usize, area: f64, dt: f64, t_f: f64) -> Result<Trajectory> {
    if input >= sys.inputs() {
        return Err(Error::InvalidInput(format!("input {input} out of range")));
    }
    if !(dt > 0.0 && t_f > dt) {
        return Err(Error::InvalidInput("need 0 < dt < t_f".into()));
    }
    let n = sys.n();
    let v = sys.inputs();
    let mut aug = DMatrix::<f64>::zeros(n + v, n + v);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * dt));
    aug.view_mut((0, n), (n, v)).copy_from(&(&sys.b * dt));
    let e = aug.exp();
    let phi = e.view((0, 0), (n, n)).into_owned();
    let gamma = e.view((0, n), (n, v)).column(input).into_owned();

    let steps = (t_f / dt).round() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut x = nalgebra::DVector::<f64>::zeros(n);
    rows.push(x.as_slice().to_vec());
    x = &gamma * (area / dt);
    rows.push(x.as_slice().to_vec());
    for _ in 1..steps {
        x = &phi * &x;
        rows.push(x.as_slice().to_vec());
    }
    Ok(Trajectory {
        bus_ids: (1..=n as u32).collect(),
        dt,
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        v_mag: rows,
        svc_q: Vec::new(),
        injection_q: Vec::new(),
        status: SimStatus::Completed,
        contingency: None,
        schedules: Vec::new(),
    })
}

/// Impulse runs for the given inputs (all combinations of plan directions and sizes).
pub fn linear_impulse_runs(
    sys: &LinearSystem,
    plan: &ExcitationPlan,
    inputs: &[usize],
    dt: f64,
    t_f: f64,
) -> Result<Vec<PerturbedRun>> {
    if plan.shape != Shape::Impulse {
        return Err(Error::InvalidInput("linear oracle runs need an impulse plan".into()));
    }
    let mut runs = Vec::new();
    for &input in inputs {
        for (l, dir) in plan.directions.iter().enumerate() {
            for (m, &c) in plan.sizes.iter().enumerate() {
                let trajectory = simulate_linear_impulse(sys, input, dir.sign() * c, dt, t_f)?;
                runs.push(PerturbedRun { input, direction: l, size: m, trajectory, output: None });
            }
        }
    }
    Ok(runs)
}

/// Empirical covariance of a linear system over all its inputs, x0 = 0.
pub fn linear_impulse_covariance(
    sys: &LinearSystem,
    plan: &ExcitationPlan,
    dt: f64,
    t_f: f64,
) -> Result<CovarianceMatrix> {
    let inputs: Vec<usize> = (0..sys.inputs()).collect();
    let runs = linear_impulse_runs(sys, plan, &inputs, dt, t_f)?;
    let zeros = vec![0.0; sys.n()];
    empirical_covariance(Baseline::Constant(&zeros), &runs, plan)
}

#[cfg(test)]
mod tests {
    use super::super::Direction;
    use super::*;

    fn sys(a: &[f64], b: &[f64], n: usize, v: usize) -> LinearSystem {
        LinearSystem::new(DMatrix::from_row_slice(n, n, a), DMatrix::from_row_slice(n, v, b)).unwrap()
    }

    #[test]
    fn scalar_gramian() {
        let w = analytic_gramian(&sys(&[-1.0], &[1.0], 1, 1)).unwrap();
        assert!((w.matrix[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn decoupled_gramian() {
        let w = analytic_gramian(&sys(&[-1.0, 0.0, 0.0, -2.0], &[1.0, 0.0, 0.0, 1.0], 2, 2)).unwrap();
        assert!((w.matrix[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((w.matrix[(1, 1)] - 0.25).abs() < 1e-14);
        assert!(w.matrix[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn zero_input_matrix() {
        let w = analytic_gramian(&sys(&[-1.0, 0.3, 0.0, -2.0], &[0.0, 0.0], 2, 1)).unwrap();
        assert_eq!(w.matrix.amax(), 0.0);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(analytic_gramian(&sys(&[0.5], &[1.0], 1, 1)), Err(Error::NotHurwitz { .. })));
        assert!(matches!(
            analytic_gramian(&sys(&[0.0, 1.0, -1.0, 0.0], &[1.0, 0.0], 2, 1)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn scalar_empirical_matches_integral() {
        let s = sys(&[-1.0], &[1.0], 1, 1);
        let plan = ExcitationPlan::impulse(vec![1.0], vec![Direction::Positive]);
        let w = linear_impulse_covariance(&s, &plan, 1e-3, 20.0).unwrap();
        assert!((w.matrix[(0, 0)] - 0.5).abs() < 1e-6, "{}", w.matrix[(0, 0)]);
    }

    #[test]
    fn size_normalization_cancels() {
        let s = sys(&[-1.0, 0.5, -0.2, -3.0], &[1.0, 0.0, 0.5, 1.0], 2, 2);
        let one =
            linear_impulse_covariance(&s, &ExcitationPlan::impulse(vec![1.0], vec![Direction::Positive]), 1e-2, 15.0)
                .unwrap();
        let two = linear_impulse_covariance(
            &s,
            &ExcitationPlan::impulse(vec![2.0, 4.0], vec![Direction::Positive, Direction::Negative]),
            1e-2,
            15.0,
        )
        .unwrap();
        let rel = (&one.matrix - &two.matrix).norm() / one.matrix.norm();
        assert!(rel < 1e-12, "{rel}");
    }
}
