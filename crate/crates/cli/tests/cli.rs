use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn homog(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homog"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("HOMOG_SEED_OVERRIDE")
        .env_remove("HOMOG_TOL_SCALE")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CONSTANT: &str = r#"{
    "family": {"kind": "EIKONAL"},
    "env": {"kind": "CHECKERBOARD", "cell": 1.0, "values": [1.0], "dim": 1},
    "seeds": {"start": 0, "count": 8},
    "macro": {"deltas": [0.05, 0.025]}
}"#;

const BOARD: &str = r#"{
    "family": {"kind": "POWER", "gamma": 1.0},
    "env": {"kind": "CHECKERBOARD", "cell": 1.0, "values": [0.0, 1.0], "dim": 1},
    "seeds": {"start": 0, "count": 32},
    "effective": {"p_grid": [[-1.0], [-0.75], [-0.5], [-0.25], [0.0], [0.25], [0.5], [0.75], [1.0]]}
}"#;

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_on_constant_medium_passes_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT);
    let out = tmp.path().join("out");
    let o = homog(&["verify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(!stdout.contains("FAIL"));
    let verdicts = json(&out.join("verdicts.json"));
    let list = verdicts.as_array().unwrap();
    assert!(list.len() > 20);
    assert!(list.iter().all(|v| v["status"] != "FAIL"));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["verdicts"]["failed"], 0);
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a["file"].as_str().unwrap()).collect();
    assert!(listed.contains(&"verdicts.json"));
}

#[test]
fn verify_refuses_a_used_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT);
    let out = tmp.path().join("out");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("stale.csv"), "x\n").unwrap();
    assert_eq!(homog(&["verify"], &cfg, &out).status.code(), Some(1));
}

#[test]
fn negative_discount_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(CONSTANT).unwrap();
    v["macro"]["deltas"] = serde_json::json!([0.05, -0.025]);
    let cfg = write_config(tmp.path(), "bad.json", &v.to_string());
    assert_eq!(homog(&["macro"], &cfg, &tmp.path().join("o")).status.code(), Some(1));
}

#[test]
fn parse_errors_and_missing_files_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(homog(&["shape"], &missing, tmp.path()).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_homog")).args(["verify", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn degenerate_family_is_a_hypothesis_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{"family": {"kind": "ANISO", "kappa": 0.0},
            "env": {"kind": "CHECKERBOARD", "cell": 1.0, "values": [0.0, 1.0], "dim": 2},
            "seeds": [1, 2]}"#,
    );
    assert_eq!(homog(&["verify"], &cfg, &tmp.path().join("o")).status.code(), Some(2));
}

#[test]
fn effective_table_matches_the_eikonal_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", BOARD);
    let out = tmp.path().join("o");
    assert_eq!(homog(&["effective"], &cfg, &out).status.code(), Some(0));
    let mut r = csv::Reader::from_path(out.join("effective.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["p1", "mu_lo", "mu_hi", "mu_hi_certified", "ci", "floor_limited"]
    );
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        let target = (f(0).abs() - 0.5).max(0.0);
        let mid = 0.5 * (f(1) + f(2));
        assert!((mid - target).abs() <= (0.05 * target).max(0.02), "p = {}: {mid} vs {target}", f(0));
        rows += 1;
    }
    assert_eq!(rows, 9);
    assert!(out.join("effective_reversed.csv").exists());
}

#[test]
fn seed_override_and_environment_variables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT);
    let out = tmp.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_homog"))
        .args(["gen-env"])
        .env("HOMOG_CONFIG", &cfg)
        .env("HOMOG_OUT", &out)
        .env("HOMOG_SEED_OVERRIDE", "100")
        .env("HOMOG_TOL_SCALE", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seeds"][0], 100);
    assert_eq!(m["seeds"].as_array().unwrap().len(), 8);
    assert_eq!(m["tolerances"]["tol_scale"], 2.0);
    assert!(out.join("env.csv").exists());
}

#[test]
fn report_aggregates_an_earlier_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", BOARD);
    let run = tmp.path().join("run");
    assert_eq!(homog(&["effective"], &cfg, &run).status.code(), Some(0));
    let out = tmp.path().join("rep");
    let o = Command::new(env!("CARGO_BIN_EXE_homog"))
        .args(["report", "--from"])
        .arg(&run)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(text.starts_with("kind,p1,p2,value,spread\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("hbar,")).count(), 9);
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["source_command"], "effective");
}

#[test]
fn metric_and_shape_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", BOARD);
    let m = tmp.path().join("m");
    assert_eq!(homog(&["metric"], &cfg, &m).status.code(), Some(0));
    let text = std::fs::read_to_string(m.join("metric.csv")).unwrap();
    assert!(text.starts_with("x,value\n"));
    assert_eq!(json(&m.join("metric.json"))["summary"]["mu"], 1.0);
    let s = tmp.path().join("s");
    assert_eq!(homog(&["shape"], &cfg, &s).status.code(), Some(0));
    assert!(json(&s.join("shape_checks.json"))["fekete"]["passed"].as_bool().unwrap());
}
