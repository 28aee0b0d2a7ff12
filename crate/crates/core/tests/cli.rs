use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_preview-lqr"))
}

#[test]
fn verify_passes() {
    let out = cli().args(["verify", "--seed", "7"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}

#[test]
fn pendulum_grid_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["pendulum-grid", "--t-min", "20", "--t-max", "100", "--t-step", "20", "--w-max", "10"])
        .args(["--trials", "20", "--seed", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pendulum.csv")).unwrap();
    let rows = preview_lqr::experiments::parse_csv(&csv).unwrap();
    assert_eq!(rows.len(), 5 * 11);
    assert!(rows.iter().all(|r| r.excluded_trials == 0));
    assert!(rows.iter().all(|r| r.margin_min >= -1e-6 * r.bound));
}

#[test]
fn bound_check_constants_in_unit_interval() {
    let out = cli().arg("bound-check").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["eta", "gamma", "q"] {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!(v > 0.0 && v < 1.0, "{name} = {v}");
    }
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(&cfg, "t_min = 8\nt_max = 8\nw_max = 3\ntrials = 9\nsvg = true\n").unwrap();
    let out = cli()
        .args(["disturbance-grid", "--system", "random", "--trials", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("random-disturbance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(dir.path().join("random-disturbance_phi.svg").exists());
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["--nope"][..], &["pendulum-grid", "--w-max"][..], &["frobnicate"][..]] {
        let out = cli().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let out = cli().args(["random-grid", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
