use std::fs;
use std::path::Path;

use varplace::cli::run;
use varplace::fixtures;

fn case_file(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn varplace(args: &[&str]) -> i32 {
    run(std::iter::once("varplace").chain(args.iter().copied()))
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(varplace(&["frobnicate"]), 2);
    assert_eq!(varplace(&["place", "--solver", "annealing"]), 2);
    assert_eq!(varplace(&["--help"]), 0);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(varplace(&["powerflow", "--case", "/nonexistent.toml", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn powerflow_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let good = case_file(dir.path(), "good.toml", fixtures::FIDVR_8BUS);
    assert_eq!(varplace(&["powerflow", "--case", &good, "--out", out]), 0);
    let csv = fs::read_to_string(Path::new(out).join("powerflow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    let bad = case_file(dir.path(), "bad.toml", fixtures::OVERLOAD);
    assert_eq!(varplace(&["powerflow", "--case", &bad, "--out", out]), 1);
}

#[test]
fn cost_from_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = case_file(dir.path(), "cov.csv", fixtures::COVERAGE_CURVE_SAMPLE);
    let out = dir.path().join("out");
    let code =
        varplace(&["cost", "--coverage", &table, "--n-cont", "40", "--c-fidvr", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let cost: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("cost.json")).unwrap()).unwrap();
    assert_eq!(cost["optimal_n_svc"], 25);
    assert_eq!(cost["optimal_cost"], 230.0);
    assert!(out.join("cost_curve.csv").exists());
    assert_eq!(varplace(&["cost", "--coverage", &table, "--c-fidvr=-1", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn too_many_svcs_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_file(dir.path(), "case.toml", fixtures::FIDVR_8BUS);
    let out = dir.path().join("out");
    let code = varplace(&[
        "place",
        "--case",
        &case,
        "--svcs",
        "7",
        "--mode",
        "fault-unspecified",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn single_bus_screen_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "[system]\nbase_mva = 100.0\nfrequency_hz = 60.0\n\n[[bus]]\nid = 1\nkind = \"slack\"\nv_setpoint = 1.0\n";
    let case = case_file(dir.path(), "one.toml", text);
    let out = dir.path().join("out");
    assert_eq!(varplace(&["screen", "--case", &case, "--out", out.to_str().unwrap()]), 0);
    let sev = fs::read_to_string(out.join("severity.csv")).unwrap();
    assert_eq!(sev.lines().count(), 1);
}

#[test]
fn stored_covariances_guard_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_file(dir.path(), "case.toml", fixtures::FIDVR_8BUS);
    let cfg = case_file(dir.path(), "study.toml", "[sim]\nt_f = 4.0\n");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let base = ["--case", &case, "--config", &cfg, "--out", out, "--mode", "fault-unspecified"];
    let with = |extra: &[&str]| {
        let mut a = vec!["ecc"];
        a.extend_from_slice(&base);
        a.extend_from_slice(extra);
        varplace(&a)
    };
    assert_eq!(with(&[]), 0);
    assert_eq!(with(&[]), 0);
    let short = case_file(dir.path(), "study2.toml", "[sim]\nt_f = 3.5\n");
    let mut a = vec!["ecc", "--case", &case, "--config", &short, "--out", out, "--mode", "fault-unspecified"];
    assert_eq!(varplace(&a), 2);
    a.push("--rebuild");
    assert_eq!(varplace(&a), 0);
}

#[test]
fn place_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_file(dir.path(), "case.toml", fixtures::FIDVR_8BUS);
    let cfg = case_file(dir.path(), "study.toml", "[sim]\nt_f = 4.0\n");
    let run_in = |name: &str| {
        let out = dir.path().join(name);
        let o = out.to_str().unwrap();
        let code = varplace(&[
            "place",
            "--case",
            &case,
            "--config",
            &cfg,
            "--out",
            o,
            "--mode",
            "fault-unspecified",
            "--svcs",
            "2",
            "--seed",
            "4",
        ]);
        assert_eq!(code, 0);
        fs::read(out.join("placement.json")).unwrap()
    };
    assert_eq!(run_in("a"), run_in("b"));
}

#[test]
fn shipped_study_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/study.toml");
    let out = dir.path().join("out");
    assert_eq!(varplace(&["powerflow", "--config", cfg, "--out", out.to_str().unwrap()]), 0);
    assert!(out.join("powerflow.json").exists());
}
