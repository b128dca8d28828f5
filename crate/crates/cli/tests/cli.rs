use std::process::Command;

fn elspec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elspec"))
}

#[test]
fn simulate_fit_and_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let json = dir.path().join("report.json");
    let status = elspec()
        .args(["simulate", "--family", "vasicek", "--seed", "5", "--out"])
        .arg(&series)
        .args(["-s", "theta=0.85837,0.089102,0.0021854", "-s", "n=150"])
        .status()
        .unwrap();
    assert!(status.success());
    let first = std::fs::read_to_string(&series).unwrap();
    assert_eq!(first.lines().count(), 152);

    let fit = elspec().args(["fit", "--family", "vasicek", "--data"]).arg(&series).output().unwrap();
    assert!(fit.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(v["theta_hat"].as_array().unwrap().len(), 3);

    let test = elspec()
        .args(["test", "--family", "vasicek", "-s", "b=99", "--data"])
        .arg(&series)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert!(test.status.success(), "{}", String::from_utf8_lossy(&test.stderr));
    let stdout = String::from_utf8(test.stdout).unwrap();
    assert!(stdout.starts_with("Model\tTest statistic L_n"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["p_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_errors_exit_with_two() {
    let missing = elspec().args(["fit", "--family", "vasicek", "--data", "/nonexistent/rates.csv"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));

    let unknown = elspec().args(["fit", "-s", "bogus=1"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "family = vasicek\nfamily = cir\n").unwrap();
    let dup = elspec().arg("fit").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(dup.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "family = vasicek\ntheta = 0.85837, 0.089102, 0.0021854\nn = 50\nseed = 1\n").unwrap();
    let a = elspec().arg("simulate").arg("--config").arg(&cfg).output().unwrap();
    let b = elspec().arg("simulate").arg("--config").arg(&cfg).args(["--seed", "2"]).output().unwrap();
    let c = elspec().arg("simulate").arg("--config").arg(&cfg).args(["-s", "seed=2"]).output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
}

#[test]
fn keys_lists_every_config_key() {
    let out = elspec().arg("keys").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), elspec_keys());
}

fn elspec_keys() -> usize {
    elspec::io::KNOWN_KEYS.len()
}
