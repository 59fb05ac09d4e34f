use std::path::PathBuf;
use std::process::{Command, Output};

fn platecap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platecap")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("platecap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn hardy_output_is_reproducible_and_bounded() {
    let a = platecap(&["run", "hardy", "--variant", "log-outer", "--samples", "200", "--seed", "4"]);
    let b = platecap(&["run", "hardy", "--variant", "log-outer", "--samples", "200", "--seed", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,ratio"));
    let ratios: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 200);
    assert!(ratios.iter().all(|r| *r <= 4.0));
}

#[test]
fn unknown_variant_is_a_configuration_error() {
    let out = platecap(&["run", "hardy", "--variant", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let cfg = scratch("hardy.json");
    std::fs::write(&cfg, r#"{"samples": 50, "variant": "shifted", "shift": 0.2}"#).unwrap();
    let out = platecap(&["run", "hardy", "--config", cfg.to_str().unwrap(), "--samples", "7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 8);

    std::fs::write(&cfg, r#"{"sample": 50}"#).unwrap();
    let out = platecap(&["run", "hardy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dry_run_prints_the_plan_only() {
    let target = scratch("never-written.json");
    let out = platecap(&["run", "capacity", "--T", "8", "--nz", "6", "--dry-run", "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("capacity"), "{text}");
    assert!(!target.exists());
}

#[test]
fn capacity_rejects_a_short_truncation() {
    let out = platecap(&["run", "capacity", "--T", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capacity_writes_a_record_with_a_symmetry_defect() {
    let json = scratch("cap.json");
    let csv = scratch("decay.csv");
    let out = platecap(&[
        "run",
        "capacity",
        "--material",
        "iso:1,1",
        "--T",
        "8",
        "--nz",
        "4",
        "--h-core",
        "0.35",
        "--growth",
        "1.4",
        "--h-far",
        "1.5",
        "--output",
        json.to_str().unwrap(),
        "--decay-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(record["symmetry_defect"].as_f64().unwrap() >= 0.0);
    assert_eq!(record["C_sharp"].as_array().unwrap().len(), 16);
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 2);

    let first = std::fs::read(&json).unwrap();
    let again = platecap(&[
        "run", "capacity", "--T", "8", "--nz", "4", "--h-core", "0.35", "--growth", "1.4", "--h-far", "1.5", "--jobs", "3",
        "--output", json.to_str().unwrap(),
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(&json).unwrap(), first);
}

#[test]
fn kirchhoff_and_fundsol_checks_pass() {
    assert_eq!(platecap(&["run", "kirchhoff", "--levels", "16,32,64"]).status.code(), Some(0));
    assert_eq!(platecap(&["run", "fundsol-verify"]).status.code(), Some(0));
    assert_eq!(platecap(&["run", "ansatz-residual", "--degree", "3", "--random-materials", "1"]).status.code(), Some(0));
}

#[test]
fn korn_sweep_table_is_sorted_by_thickness() {
    let out = platecap(&["run", "korn-sweep", "--mode", "supports", "--J", "2", "--h", "0.1,0.2", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let hs: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(hs, ["0.2", "0.1"]);
}
