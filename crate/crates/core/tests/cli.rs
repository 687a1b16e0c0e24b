use std::process::Command;

fn lasdg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lasdg"))
}

fn small_config(dir: &std::path::Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(
        &path,
        format!("mapping_nodes = 2\ndata_centers = 2\nhorizon = 200\nrealizations = 2\noracle_samples = 500\n{extra}"),
    )
    .unwrap();
    path
}

#[test]
fn validate_succeeds() {
    let out = lasdg().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 6, "{stdout}");
}

#[test]
fn simulate_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "algo = la_sdg\n");
    let out_dir = dir.path().join("out");
    let out = lasdg()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("la_sdg,0.2,"));
    assert!(out_dir.join("trajectory_r0.csv").exists());
}

#[test]
fn compare_overrides_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "sweep_beta = 0.5, 0.99\n");
    let out_dir = dir.path().join("cmp");
    let out = lasdg()
        .args(["compare", "--horizon", "100", "--realizations", "1", "--seed", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().all(|l| l.ends_with(",1") || l.starts_with("algo")));
}

#[test]
fn oracle_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("oracle");
    let out = lasdg().args(["oracle", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("oracle.txt")).unwrap();
    let report = lasdg::oracle::OracleReport::parse(&text).unwrap();
    assert_eq!(report.lambda.len(), 4);
    assert_eq!(report.sample_count, 500);
    assert!(text.contains("growth_eps = "));
}

#[test]
fn bad_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "mu = banana\n");
    let out = lasdg().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: line 6"), "{stderr}");

    let missing = lasdg().args(["simulate", "--config", "/nonexistent/run.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
