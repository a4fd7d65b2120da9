use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn jjcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jjcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn build_then_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let out = jjcert(&["build", "--out", model.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    for key in ["n_modes", "M", "N", "Etilde", "gamma", "delta1", "delta2"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }

    let out = jjcert(&["certify", "--model", model.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let cert = stdout_json(&out);
    assert_eq!(cert["certified"], Value::Bool(true));
    let norm = cert["hinf_norm"].as_f64().unwrap();
    assert!((norm - 5.5554e-13).abs() <= 1e-3 * 5.5554e-13);
    assert!(out.stderr.is_empty());
}

#[test]
fn uncertified_model_exits_2() {
    let out = jjcert(&["certify", "--kappa2", "1e12", "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["certified"], Value::Bool(false));
}

#[test]
fn margin_can_revoke_certificate() {
    let out = jjcert(&["certify", "--margin", "0.5", "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn params_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    fs::write(
        &params,
        r#"{"omega": 6.283185307179586e11, "g": 0.15, "U": 2.2087e-22, "Jp": 3.6652e11,
            "kappa1": 1e11, "kappa2": 1e12, "hbar": 1.0546e-34}"#,
    )
    .unwrap();
    let p = params.to_str().unwrap();
    assert_eq!(jjcert(&["certify", "--params", p, "--quiet"]).status.code(), Some(2));
    assert_eq!(
        jjcert(&["certify", "--params", p, "--kappa2", "2.5e12", "--quiet"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn bad_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = jjcert(&["certify", "--model", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    assert_eq!(jjcert(&["certify", "--Jp", "0"]).status.code(), Some(1));
    assert_eq!(jjcert(&["sweep", "--kappa2-grid", "1e11:1e13"]).status.code(), Some(1));
    assert_eq!(jjcert(&["build", "--format", "csv"]).status.code(), Some(1));
}

#[test]
fn sweep_csv_has_one_flip() {
    let out = jjcert(&["sweep", "--kappa2-grid", "1e11:1e13:12", "--quiet"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kappa2,hinf_norm,hurwitz,certified,error"));
    let rows: Vec<(f64, bool)> = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].parse().unwrap(), cells[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0].0, 1e11);
    assert_eq!(rows[11].0, 1e13);
    let flips = rows.windows(2).filter(|w| w[0].1 != w[1].1).count();
    assert_eq!(flips, 1);
}

#[test]
fn threshold_and_false_bracket() {
    let out = jjcert(&["threshold", "--quiet"]);
    assert!(out.status.success());
    let k = stdout_json(&out)["kappa2_star"].as_f64().unwrap();
    assert!((2.0e12..=2.4e12).contains(&k));

    let out = jjcert(&["threshold", "--lo", "5e12", "--hi", "1e13", "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_json(&out)["error"].is_string());
}

#[test]
fn bode_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bode.csv");
    let out = jjcert(&["bode", "--points", "50", "--out", path.to_str().unwrap(), "--quiet"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    let omegas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(omegas.len() >= 50);
    assert!(omegas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sensitivity_json() {
    let out = jjcert(&[
        "sensitivity",
        "--kappa1-grid",
        "1e11:1e11:1",
        "--format",
        "json",
        "--quiet",
    ]);
    assert!(out.status.success());
    let rows = stdout_json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 1);
    let norm = rows[0]["hinf_norm"].as_f64().unwrap();
    assert!((norm - 5.5554e-13).abs() <= 1e-3 * 5.5554e-13);
}

#[test]
fn simulate_writes_trajectory_and_footer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = jjcert(&[
        "simulate",
        "--t-end",
        "2e-11",
        "--dt",
        "1e-14",
        "--out",
        path.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re0,im0,re1,im1,re2,im2,re3,im3,norm_sq"));
    assert_eq!(lines.count(), 2001);

    let footer: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim.csv.decay.json")).unwrap()).unwrap();
    let c2 = footer["c2"].as_f64().unwrap();
    assert!((c2 - 1e11).abs() <= 0.05 * 1e11);

    let out = jjcert(&["simulate", "--v0", "[[1,0]]", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    let out = jjcert(&["simulate", "--dt", "1e-12", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("try dt"));
}

#[test]
fn verify_sector_defaults_and_tightened_delta2() {
    let out = jjcert(&["verify-sector", "--points", "201", "--quiet"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(true));

    let out = jjcert(&[
        "verify-sector",
        "--Jp",
        "2",
        "--delta2",
        "3.96",
        "--range",
        "5",
        "--points",
        "101",
        "--quiet",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["first"]["passed"], Value::Bool(true));
    assert_eq!(report["second"]["passed"], Value::Bool(false));
    assert_eq!(report["passed"], Value::Bool(false));
}
