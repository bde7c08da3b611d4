mod common;

use varplace::dynsim::{simulate, ContingencySpec, InjectionSchedule, Integrator, SimConfig, Trajectory};
use varplace::fixtures;

fn worst() -> ContingencySpec {
    ContingencySpec::new("b3@4", 4, 3, 5.0)
}

fn max_dev(t: &Trajectory, v0: &[f64]) -> f64 {
    t.v_mag.iter().flat_map(|r| r.iter().zip(v0).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
}

#[test]
fn undisturbed_runs_stay_flat() {
    for (name, text) in fixtures::CASES {
        if name == "overload" {
            continue;
        }
        let (net, dev) = common::setup(text);
        for integrator in [Integrator::Trapezoidal, Integrator::Rk4] {
            let cfg = SimConfig { integrator, ..SimConfig::default() };
            let t = simulate(&net, &dev, None, &[], &cfg).unwrap();
            assert!(!t.is_diverged());
            let d = max_dev(&t, &dev.v0());
            assert!(d <= 1e-6, "{name} {integrator:?}: {d:e}");
        }
    }
}

#[test]
fn bolted_fault_collapses_fault_bus() {
    let (net, dev) = common::fidvr();
    let cfg = common::short_cfg(1.0);
    let c = worst();
    let t = simulate(&net, &dev, Some(&c), &[], &cfg).unwrap();
    let series = t.bus_series(4).unwrap();
    let t_clear = c.clearing_time(&cfg, net.frequency_hz);
    let during: Vec<f64> = t
        .times
        .iter()
        .zip(&series)
        .filter(|(tk, _)| **tk >= 0.1 - 1e-9 && **tk < t_clear - 1e-9)
        .map(|(_, v)| *v)
        .collect();
    assert_eq!(during.len(), 20);
    assert!(during.iter().all(|v| *v <= 0.05), "{during:?}");
    assert!(series[0] > 0.9);
}

#[test]
fn delayed_recovery_shape() {
    let (net, dev) = common::fidvr();
    let cfg = SimConfig::default();
    let t = simulate(&net, &dev, Some(&worst()), &[], &cfg).unwrap();
    let v0 = dev.v0()[3];
    let v = t.bus_series(4).unwrap();
    let t_clear = worst().clearing_time(&cfg, net.frequency_hz);
    let mut run = 0;
    let mut longest = 0;
    let mut v_min = f64::INFINITY;
    for (tk, x) in t.times.iter().zip(&v) {
        if *tk < t_clear - 1e-9 {
            continue;
        }
        v_min = v_min.min(*x);
        run = if *x < 0.8 * v0 { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    assert!(v_min < 0.75 * v0, "{v_min}");
    assert!(longest as f64 * cfg.dt > 5.0 / 60.0, "{longest}");
    let end = *v.last().unwrap();
    assert!(end > 0.85 * v0 && end < v0, "{end} vs {v0}");
}

fn error_vs(coarse: &Trajectory, fine: &Trajectory, every: usize) -> f64 {
    coarse
        .v_mag
        .iter()
        .enumerate()
        .flat_map(|(k, row)| row.iter().zip(&fine.v_mag[k * every]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn step_halving_is_first_order() {
    let (net, dev) = common::fidvr();
    let run = |dt: f64| {
        let cfg = SimConfig { dt, t_f: 2.0, ..SimConfig::default() };
        simulate(&net, &dev, Some(&worst()), &[], &cfg).unwrap()
    };
    let base = 1.0 / 240.0;
    let (a, b, r) = (run(base), run(base / 2.0), run(base / 16.0));
    let ratio = error_vs(&a, &r, 16) / error_vs(&b, &r, 8);
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
}

#[test]
fn svc_output_never_exceeds_rating() {
    let (net, dev) = common::fidvr();
    for rating in [10.0, 40.0, 200.0] {
        let t =
            simulate(&net, &dev, Some(&worst()), &[InjectionSchedule::svc(4, rating)], &SimConfig::default()).unwrap();
        let q = &t.svc_q[0].values;
        assert_eq!(q.len(), t.n_samples());
        assert!(q.iter().all(|x| x.abs() <= rating * (1.0 + 1e-12)), "{rating}");
        if rating <= 40.0 {
            let v = t.bus_series(4).unwrap();
            let at_limit = q.iter().zip(&v).any(|(x, m)| (x - rating * m * m).abs() < 1e-9);
            assert!(at_limit, "{rating} never reaches its susceptance limit");
        }
    }
}

#[test]
fn support_raises_voltage() {
    let (net, dev) = common::fidvr();
    let cfg = SimConfig::default();
    let base = simulate(&net, &dev, Some(&worst()), &[], &cfg).unwrap();
    let with = simulate(&net, &dev, Some(&worst()), &[InjectionSchedule::svc(4, 100.0)], &cfg).unwrap();
    let j = base.bus_ids.iter().position(|&b| b == 4).unwrap();
    let k_end = base.n_samples() - 1;
    assert!(with.v_mag[k_end][j] > base.v_mag[k_end][j]);
    let gain: f64 = (0..base.n_samples()).map(|k| with.v_mag[k][j] - base.v_mag[k][j]).sum();
    assert!(gain > 0.0);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (net, dev) = common::fidvr();
    let cfg = common::short_cfg(2.0);
    let a = simulate(&net, &dev, Some(&worst()), &[InjectionSchedule::svc(6, 50.0)], &cfg).unwrap();
    let b = simulate(&net, &dev, Some(&worst()), &[InjectionSchedule::svc(6, 50.0)], &cfg).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    let back = Trajectory::from_csv(&a.to_csv().unwrap()).unwrap();
    assert_eq!(back.v_mag, a.v_mag);
}
