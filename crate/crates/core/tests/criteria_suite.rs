use proptest::prelude::*;
use varplace::dynsim::{SimStatus, Trajectory};
use varplace::netmodel::BusKind;
use varplace::vsi::{
    check_criteria, severity_rank, ContingencyRun, CriteriaSpec, CRIT_POST_TRANSIENT, CRIT_SUSTAINED_DIP,
    CRIT_TRANSIENT_DIP,
};

const DT: f64 = 1.0 / 240.0;
const N: usize = 1201;
const CLEAR: f64 = 0.1 + 5.0 / 60.0;

fn traj(cols: &[Vec<f64>]) -> Trajectory {
    Trajectory {
        bus_ids: (1..=cols.len() as u32).collect(),
        dt: DT,
        times: (0..cols[0].len()).map(|k| k as f64 * DT).collect(),
        v_mag: (0..cols[0].len()).map(|k| cols.iter().map(|c| c[k]).collect()).collect(),
        svc_q: vec![],
        injection_q: vec![],
        status: SimStatus::Completed,
        contingency: None,
        schedules: vec![],
    }
}

fn window(v0: f64, from: usize, len: usize, level: f64) -> Vec<f64> {
    (0..N).map(|k| if k >= from && k < from + len { level * v0 } else { v0 }).collect()
}

fn flags_of(col: Vec<f64>, v0: f64, kind: BusKind) -> u8 {
    check_criteria(&traj(&[col]), &[v0], &CriteriaSpec::default(), &[kind], CLEAR, 60.0).unwrap().criteria()
}

#[test]
fn each_criterion_in_isolation() {
    let start = 60;
    // deep but short: only (a)
    assert_eq!(flags_of(window(1.02, start, 12, 0.70), 1.02, BusKind::Pq), CRIT_TRANSIENT_DIP);
    // shallow and long but over before 3 s: only (b)
    assert_eq!(flags_of(window(1.02, start, 100, 0.78), 1.02, BusKind::Pq), CRIT_SUSTAINED_DIP);
    // small offset after 3 s: only (c)
    assert_eq!(flags_of(window(1.02, 800, 200, 0.93), 1.02, BusKind::Pq), CRIT_POST_TRANSIENT);
    // generator buses tolerate a 28% dip
    assert_eq!(flags_of(window(1.0, start, 12, 0.72), 1.0, BusKind::Slack), 0);
    assert_eq!(flags_of(window(1.0, start, 12, 0.72), 1.0, BusKind::Pq), CRIT_TRANSIENT_DIP);
}

#[test]
fn dips_before_clearing_are_ignored() {
    assert_eq!(flags_of(window(1.0, 24, 20, 0.0), 1.0, BusKind::Pq), 0);
}

#[test]
fn sustained_boundary() {
    let per_cycle = 4;
    assert_eq!(flags_of(window(1.0, 60, 20 * per_cycle, 0.79), 1.0, BusKind::Pq), 0);
    assert_eq!(flags_of(window(1.0, 60, 20 * per_cycle + 1, 0.79), 1.0, BusKind::Pq), CRIT_SUSTAINED_DIP);
}

#[test]
fn superset_contingency_ranks_first() {
    let a = traj(&[window(1.0, 800, 300, 0.9), vec![1.0; N]]);
    let b = traj(&[window(1.0, 800, 300, 0.9), window(1.0, 800, 300, 0.9)]);
    let runs = [
        ContingencyRun { id: "a", trajectory: &a, clearing_time: CLEAR },
        ContingencyRun { id: "b", trajectory: &b, clearing_time: CLEAR },
    ];
    let rep = severity_rank(&runs, &[1.0, 1.0], &CriteriaSpec::default(), &[BusKind::Pq; 2], N, 60.0).unwrap();
    assert_eq!(rep.ranking, vec!["b", "a"]);
    assert!((rep.entries[1].si - 2.0 * rep.entries[0].si).abs() < 1e-15);
}

#[test]
fn diverged_run_is_most_severe() {
    let mut d = traj(&[window(1.0, 60, 10, 0.7)]);
    d.v_mag.truncate(100);
    d.times.truncate(100);
    d.status = SimStatus::Diverged { time: 99.0 * DT, reason: "test".into() };
    let ok = traj(&[window(1.0, 60, 10, 0.7)]);
    let runs = [
        ContingencyRun { id: "ok", trajectory: &ok, clearing_time: CLEAR },
        ContingencyRun { id: "lost", trajectory: &d, clearing_time: CLEAR },
    ];
    let rep = severity_rank(&runs, &[1.0], &CriteriaSpec::default(), &[BusKind::Pq], N, 60.0).unwrap();
    assert_eq!(rep.ranking[0], "lost");
    assert!(rep.entries[1].diverged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn severity_zero_iff_unflagged(
        levels in proptest::collection::vec(0.5f64..1.1, 3),
        starts in proptest::collection::vec(45usize..1100, 3),
        lens in proptest::collection::vec(1usize..150, 3),
    ) {
        let cols: Vec<Vec<f64>> = (0..3).map(|j| window(1.0, starts[j], lens[j], levels[j])).collect();
        let t = traj(&cols);
        let spec = CriteriaSpec::default();
        let kinds = [BusKind::Pq; 3];
        let flags = check_criteria(&t, &[1.0; 3], &spec, &kinds, CLEAR, 60.0).unwrap();
        let runs = [ContingencyRun { id: "k", trajectory: &t, clearing_time: CLEAR }];
        let si = severity_rank(&runs, &[1.0; 3], &spec, &kinds, N, 60.0).unwrap().entries[0].si;
        prop_assert!(si >= 0.0);
        prop_assert_eq!(si == 0.0, !flags.any());
    }

    #[test]
    fn flat_is_never_flagged(v0 in 0.9f64..1.1) {
        let t = traj(&[vec![v0; N]]);
        prop_assert!(!check_criteria(&t, &[v0], &CriteriaSpec::default(), &[BusKind::Pq], CLEAR, 60.0).unwrap().any());
    }
}
