mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use varplace::ecc::{
    analytic_gramian, build_covariances, empirical_covariance, linear_impulse_covariance, linear_impulse_runs,
    Baseline, Direction, EccMode, ExcitationPlan, LinearSystem,
};

fn impulse_plan() -> ExcitationPlan {
    ExcitationPlan::impulse(vec![0.5, 1.0], vec![Direction::Positive, Direction::Negative])
}

#[test]
fn diagonal_gramian_closed_form() {
    let a = [-0.5, -1.5, -4.0];
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, -0.4, 2.0, 0.7, 0.1]);
    let sys = LinearSystem::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&a)), b.clone()).unwrap();
    let w = analytic_gramian(&sys).unwrap();
    let q = &b * b.transpose();
    for i in 0..3 {
        for j in 0..3 {
            let expect = q[(i, j)] / -(a[i] + a[j]);
            assert!((w.matrix[(i, j)] - expect).abs() < 1e-13, "{i},{j}");
        }
    }
}

#[test]
fn empirical_matches_analytic_on_random_systems() {
    for seed in 0..4 {
        let sys = common::random_hurwitz(seed, 3, 2);
        let t_f = 10.0 * sys.slowest_time_constant();
        let emp = linear_impulse_covariance(&sys, &impulse_plan(), 1e-3, t_f).unwrap();
        let ana = analytic_gramian(&sys).unwrap();
        let e = common::rel_frobenius(&emp.matrix, &ana.matrix);
        assert!(e < 1e-3, "seed {seed}: {e:e}");
    }
}

#[test]
fn per_input_covariances_add_up() {
    let sys = common::random_hurwitz(11, 4, 3);
    let plan = impulse_plan();
    let zeros = vec![0.0; 4];
    let joint_runs = linear_impulse_runs(&sys, &plan, &[0, 1, 2], 1e-2, 8.0).unwrap();
    let joint = empirical_covariance(Baseline::Constant(&zeros), &joint_runs, &plan).unwrap();
    let mut sum = DMatrix::zeros(4, 4);
    for i in 0..3 {
        let runs = linear_impulse_runs(&sys, &plan, &[i], 1e-2, 8.0).unwrap();
        sum += empirical_covariance(Baseline::Constant(&zeros), &runs, &plan).unwrap().matrix;
    }
    assert!((joint.matrix - sum).amax() <= 1e-12);
}

#[test]
fn network_covariances_are_symmetric_psd() {
    let (net, dev) = common::fidvr();
    let cfg = common::short_cfg(3.0);
    let covs =
        build_covariances(&net, &dev, &EccMode::FaultUnspecified, &ExcitationPlan::fault_unspecified(), &[4, 7], &cfg)
            .unwrap();
    for c in covs {
        let w = &c.covariance;
        assert_eq!(w.dim(), net.n_bus());
        assert_eq!(w.asymmetry(), 0.0);
        assert!(w.is_psd(1e-12), "{:?}", w.eigen_range());
        assert!(w.trace() > 0.0);
        assert!(c.diverged_sizes.is_empty());
    }
}

#[test]
fn small_pulses_are_nearly_linear() {
    let (net, dev) = common::fidvr();
    let cfg = common::short_cfg(3.0);
    let with = |size: f64| {
        let plan = ExcitationPlan { sizes: vec![size], ..ExcitationPlan::fault_unspecified() };
        build_covariances(&net, &dev, &EccMode::FaultUnspecified, &plan, &[5], &cfg).unwrap().remove(0).covariance
    };
    let (a, b) = (with(10.0), with(20.0));
    let ratio = a.trace() / b.trace();
    assert!((ratio - 1.0).abs() <= 0.25, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gramian_scales_with_input_gain(seed in 0u64..1000, k in 0.1f64..5.0) {
        let sys = common::random_hurwitz(seed, 3, 2);
        let scaled = LinearSystem::new(sys.a.clone(), &sys.b * k).unwrap();
        let w = analytic_gramian(&sys).unwrap();
        let ws = analytic_gramian(&scaled).unwrap();
        prop_assert!(common::rel_frobenius(&ws.matrix, &(&w.matrix * (k * k))) < 1e-9);
        prop_assert!(w.is_psd(1e-10));
    }

    #[test]
    fn empirical_is_psd_and_size_invariant(seed in 0u64..1000, c in 0.01f64..10.0) {
        let sys = common::random_hurwitz(seed, 3, 2);
        let one = linear_impulse_covariance(&sys, &ExcitationPlan::impulse(vec![1.0], vec![Direction::Positive]), 1e-2, 6.0).unwrap();
        let sized = linear_impulse_covariance(&sys, &ExcitationPlan::impulse(vec![c], vec![Direction::Negative]), 1e-2, 6.0).unwrap();
        prop_assert!(one.is_psd(1e-12));
        prop_assert_eq!(one.asymmetry(), 0.0);
        prop_assert!(common::rel_frobenius(&sized.matrix, &one.matrix) < 1e-10);
    }
}
