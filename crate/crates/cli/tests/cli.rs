use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nlrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlrf")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn minimize_without_disorder_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nlrf(&["minimize", "--out", out, "--theta", "0", "--n", "16", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stem = "minimize_1d_s0.75_theta0_n16";
    let csv = read(dir.path(), &format!("{stem}.csv"));
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let total: f64 = row[header.iter().position(|h| *h == "total").unwrap()].parse().unwrap();
    assert!(total.abs() < 1e-10, "{total}");
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), &format!("{stem}.json"))).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["seed"], 7);
    assert!(dir.path().join(format!("{stem}_agg.csv")).exists());
    assert!(!csv.contains('\r'));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "experiment = minimize\nd = 1\ns = 0.5\ntheta = 1\nn = 16\nseed = 7\n").unwrap();
    let out = dir.path().join("out");
    let o = nlrf(&[
        "--config",
        cfg.to_str().unwrap(),
        "--theta=0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&read(&out, "minimize_1d_s0.5_theta0_n16.json")).unwrap();
    assert_eq!(m["config"]["theta"], 0.0);
    assert_eq!(m["config"]["s"], 0.5);
}

#[test]
fn config_errors_exit_2_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nlrf(&["minimize", "--out", out, "--s", "1.2"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`s`"));
    let o = nlrf(&["minimize", "--out", out, "--set", "colour=red"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let o = nlrf(&["teleport", "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));
    // nothing computed, nothing written
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let target = blocker.join("sub");
    let o = nlrf(&["minimize", "--out", target.to_str().unwrap(), "--n", "8"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn existing_output_needs_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["minimize", "--out", out, "--n", "8", "--theta", "0"];
    assert_eq!(code(&nlrf(&args)), 0);
    let stem = "minimize_1d_s0.75_theta0_n8";
    let before = read(dir.path(), &format!("{stem}.json"));
    fs::write(dir.path().join(format!("{stem}.csv")), "sentinel").unwrap();
    assert_eq!(code(&nlrf(&args)), 2);
    assert_eq!(read(dir.path(), &format!("{stem}.csv")), "sentinel");
    assert_eq!(read(dir.path(), &format!("{stem}.json")), before);
    let mut with = args.to_vec();
    with.push("--overwrite");
    assert_eq!(code(&nlrf(&with)), 0);
    assert_ne!(read(dir.path(), &format!("{stem}.csv")), "sentinel");
}

#[test]
fn failure_quota_exits_1_with_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nlrf(&[
        "extremal", "--out", out, "--n", "16", "--realizations", "4", "--max-iter", "1",
    ]);
    assert_eq!(code(&o), 1);
    let m: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "extremal_1d_s0.75_theta1_n16.json")).unwrap();
    assert_eq!(m["status"], "failure_quota_exceeded");
    assert!(m["failures"].as_u64().unwrap() > 0);
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = nlrf(&["gap", "--out", a.to_str().unwrap(), "--n", "16", "--realizations", "3", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stem = "gap_1d_s0.75_theta1_n16";
    let cfg = a.join(format!("{stem}.cfg"));
    let o = nlrf(&["--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for suffix in [".csv", "_agg.csv"] {
        assert_eq!(read(&a, &format!("{stem}{suffix}")), read(&b, &format!("{stem}{suffix}")));
    }
}

#[test]
fn diagnostics_writes_two_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nlrf(&[
        "diagnostics", "--out", out, "--n", "16", "--realizations", "1", "--set", "cube_list=4,8,16",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("diagnostics_1d_s0.75_theta1_n16.csv").exists());
    assert!(dir.path().join("envelope_1d_s0.75_theta1_n16.csv").exists());
}
