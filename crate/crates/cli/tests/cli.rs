use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn skyplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skyplan"))
        .args(args)
        .env("SKYPLAN_LOG", "error")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn plan_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = skyplan(&["plan", fixture("small.json").to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["slots"].as_array().unwrap().len(), 11);
    assert_eq!(trace["validation"]["connectivity_violated"], false);
    let keys: Vec<&str> = trace.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["scenario_fingerprint", "slots", "totals", "validation", "iterations"] {
        assert!(keys.contains(&k), "{k}");
    }
    let slots = std::fs::read_to_string(dir.path().join("slots.csv")).unwrap();
    assert_eq!(slots.lines().count(), 12);
    assert!(slots.starts_with("n,t_s,x_m,y_m,vx,vy,ax,ay,serving_gbs,sinr,power_W"));
    let conv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.starts_with("iteration,surrogate_obj,exact_obj,penalty_residual,max_binary_gap,wall_time"));
    assert_eq!(conv.lines().count(), 1 + trace["iterations"].as_u64().unwrap() as usize);
}

#[test]
fn trace_key_order_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let o = skyplan(&["plan", fixture("small.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("trace.json")).unwrap();
    let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("scenario_fingerprint") < pos("slots"));
    assert!(pos("slots") < pos("totals") && pos("totals") < pos("validation") && pos("validation") < pos("iterations"));
    let slot = text.lines().find(|l| l.contains("\"n\": 3")).unwrap();
    let order = ["\"n\"", "t_s", "x_m", "y_m", "\"vx\"", "\"vy\"", "\"ax\"", "\"ay\"", "serving_gbs", "sinr", "power_W"];
    let idx: Vec<usize> = order.iter().map(|k| slot.find(k).unwrap()).collect();
    assert!(idx.windows(2).all(|w| w[0] < w[1]), "{slot}");
}

#[test]
fn unreachable_goal_is_infeasible() {
    let mut s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture("small.json")).unwrap()).unwrap();
    s["endpoints"]["final"] = serde_json::json!([0.0, 5000.0]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("far.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let o = skyplan(&["plan", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["feasibility"]["feasible"], false);
    let o = skyplan(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["feasible"], false);
}

#[test]
fn zero_threshold_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = skyplan(&["plan", "--seed-layout", "map1", "--gamma-min", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = skyplan(&["check", "--seed-layout", "map1", "--gamma-min", "0"]);
    assert_eq!(code(&o), 0);
    let c = stdout_json(&o);
    assert_eq!(c["feasible"], true);
    assert!(c["max_chord_deviation_m"].as_f64().unwrap() < 1e-9);
}

#[test]
fn check_reports_association_and_oracle_agreement() {
    let o = skyplan(&["check", fixture("map1.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["association"].as_array().unwrap().len(), 10);
    let o = skyplan(&["check", fixture("small.json").to_str().unwrap(), "--oracle"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["agreement"], true);
    assert_eq!(v["circle_graph"]["feasible"], true);
    assert_eq!(v["grid_oracle"]["feasible"], true);
}

#[test]
fn sweep_rows_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let small = fixture("small.json");
    let small = small.to_str().unwrap();
    let o = skyplan(&["sweep", small, "--gammas", "2,0.5,1", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("gamma,total_power_W,energy_J,converged,feasible,iterations"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let gammas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(gammas, vec![0.5, 1.0, 2.0]);

    let o = skyplan(&["sweep", small, "--gammas", "1e6", "--out", out]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",false,false,"));

    assert_eq!(code(&skyplan(&["sweep", small, "--gammas"])), 64);
    assert_eq!(code(&skyplan(&["sweep", small])), 64);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&skyplan(&["plan"])), 64);
    assert_eq!(code(&skyplan(&["plan", "/nonexistent/scenario.json"])), 64);
    assert_eq!(code(&skyplan(&["plan", "--seed-layout", "map9"])), 64);
    assert_eq!(code(&skyplan(&["frobnicate"])), 64);
    assert_eq!(code(&skyplan(&["selftest", "--probes", "nope"])), 64);
    assert_eq!(code(&skyplan(&["plan", "--seed-layout", "map1", "--max-iter", "0"])), 64);
    assert_eq!(code(&skyplan(&["--help"])), 0);
}

#[test]
fn selftest_filter_and_injected_fault() {
    let o = skyplan(&["selftest", "--probes", "concavity"]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.contains("f_j-hessian") && table.contains("PASS"));

    let o = skyplan(&["selftest", "--probes", "derivatives", "--inject-sign-error"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("derivatives/subproblem-terms"), "{err}");
    assert!(err.contains("injected sign error"));
}
