//! The empirical covariance of a stable linear system reproduces its
//! controllability gramian.

use nalgebra::DMatrix;
use varplace::ecc::{analytic_gramian, linear_impulse_covariance, Direction, ExcitationPlan, LinearSystem};

fn main() -> varplace::Result<()> {
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.0, -0.4, -1.5, 0.2, 0.0, -0.2, -0.6]);
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 0.5, 0.0, 1.0]);
    let sys = LinearSystem::new(a, b)?;
    let t_f = 10.0 * sys.slowest_time_constant();

    let exact = analytic_gramian(&sys)?;
    let plan = ExcitationPlan::impulse(vec![0.5, 1.0], vec![Direction::Positive, Direction::Negative]);
    let empirical = linear_impulse_covariance(&sys, &plan, 1e-3, t_f)?;

    println!("analytic gramian{}", exact.matrix);
    println!("empirical covariance{}", empirical.matrix);
    let err = (&empirical.matrix - &exact.matrix).norm() / exact.matrix.norm();
    println!("relative Frobenius error {err:.2e} over t_f = {t_f:.1} s");
    Ok(())
}
