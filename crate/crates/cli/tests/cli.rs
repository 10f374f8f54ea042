use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linsde"))
}

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn m(name: &str) -> String {
    model(name).display().to_string()
}

#[test]
fn classify_gaussian() {
    let v = json(&run(&["classify", "--model", &m("gauss.json"), "--t", "0.0"]));
    assert_eq!(v["case"], "Gaussian");
    assert!((v["b_t"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["report"]["case"]["tag"], "Gaussian");
    assert_eq!(v["report"]["case"]["params"]["b_t"], v["b_t"]);
    assert_eq!(v["report"]["t_star"], v["t_star"]);
}

#[test]
fn gbm_median() {
    let v = json(&run(&["quantile", "--model", &m("gbm.json"), "--t", "0", "--x", "1", "--alpha", "0.5"]));
    assert!((v["value"].as_f64().unwrap() - (-0.5f64).exp()).abs() < 1e-12);
    assert_eq!(v["provenance"]["kind"], "ClosedForm");
    assert!(v["error_band"].is_null());
}

#[test]
fn ramp_reach() {
    let v = json(&run(&["reach", "--model", &m("ramp.json"), "--t", "0.7"]));
    assert_eq!(v["branch"], "iii-b-halfline");
    assert_eq!(v["reachable"]["lo"].as_f64(), Some(-0.7));
    assert_eq!(v["reachable"]["lo_open"], true);
    assert!(v["reachable"]["hi"].is_null());
}

#[test]
fn cdf_grid_csv_has_n_plus_one_rows() {
    let out = run(&["cdf", "--model", &m("gauss.json"), "--t", "0", "--grid", "y:-2:2:8", "--out", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y,F");
    assert_eq!(lines.len(), 1 + 9);
    let mid: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(mid, vec![0.0, 0.5]);
}

#[test]
fn monte_carlo_output_echoes_seed_and_is_deterministic() {
    let args = ["cdf", "--model", &m("ramp.json"), "--t", "0", "--y", "0", "--paths", "4000", "--steps", "200"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["provenance"]["kind"], "MonteCarlo");
    assert_eq!(v["provenance"]["seed"], 42);
    assert_eq!(v["simulation"]["seed"], 42);
    assert!(v["error_band"].as_f64().unwrap() > 0.0);
}

#[test]
fn dump_model_round_trips() {
    for name in ["gauss.json", "ramp.json", "portfolio_worked.json"] {
        let out = run(&["classify", "--model", &m(name), "--t", "0", "--dump-model"]);
        let dumped = json(&out);
        let original: Value = serde_json::from_str(&std::fs::read_to_string(model(name)).unwrap()).unwrap();
        assert_eq!(dumped, original, "{name}");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("again.json");
        std::fs::write(&path, &out.stdout).unwrap();
        let again = run(&["classify", "--model", path.to_str().unwrap(), "--t", "0", "--dump-model"]);
        assert_eq!(again.stdout, out.stdout);
    }
}

#[test]
fn classify_at_horizon_is_point_mass() {
    let v = json(&run(&["classify", "--model", &m("gbm.json"), "--t", "1.0"]));
    assert_eq!(v["case"], "Degenerate");
    assert_eq!(v["report"]["case"]["tag"], "Degenerate");
}

#[test]
fn exit_codes() {
    let out = run(&["classify", "--model", &m("gauss.json"), "--t", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"linear_sde\", \"T\": 1.0}").unwrap();
    let out = run(&["classify", "--model", bad.to_str().unwrap(), "--t", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let quartic = std::fs::read_to_string(model("ramp.json")).unwrap().replace("[\n          0.0,\n          1.0\n        ]", "[0.0, 0.0, 0.0, 0.0, 1.0]");
    assert!(quartic.contains("0.0, 0.0, 0.0, 0.0, 1.0"));
    std::fs::write(&bad, quartic).unwrap();
    let out = run(&["classify", "--model", bad.to_str().unwrap(), "--t", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["pdf", "--model", &m("gbm.json"), "--t", "0", "--x", "0", "--y", "1"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["cdf", "--model", &m("gauss.json")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn portfolio_subcommands() {
    let v = json(&run(&["portfolio", "regime", "--model", &m("portfolio_worked.json"), "--t", "0.7"]));
    assert_eq!((v["t_star"].as_f64(), v["t_lower_star"].as_f64(), v["xi"].as_f64()), (Some(1.0), Some(0.5), Some(2.0)));
    assert_eq!(v["xi_tilde"].as_f64(), Some(2.0));

    let v = json(&run(&["portfolio", "reach", "--model", &m("portfolio_ramp.json"), "--t", "0.7"]));
    assert_eq!(v["specialized"], true);
    assert_eq!(v["result"]["branch"], "iii-b-halfline");
    assert!((v["result"]["reachable"]["lo"].as_f64().unwrap() + 0.7).abs() < 1e-12);

    let v = json(&run(&["portfolio", "check-h", "--model", &m("portfolio_ramp.json")]));
    assert_eq!(v["points"], 100);
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-10);

    let out = run(&["portfolio", "regime", "--model", &m("gauss.json"), "--t", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generator_and_support() {
    let v = json(&run(&["generator-check", "--model", &m("gauss.json"), "--t", "0.3", "--x", "0.1", "--y", "0.5"]));
    assert!(v["residual"].as_f64().unwrap().abs() < 1e-4);
    let v = json(&run(&["support", "--model", &m("ramp.json"), "--t", "0.7"]));
    assert_eq!(v["upper"]["infinite"], true);
    assert!((v["support"]["lo"].as_f64().unwrap() + 0.7).abs() < 5e-3);
}

#[test]
fn verify_passes_and_reports() {
    let out = run(&["verify", "--model", &m("portfolio_worked.json"), "--paths", "5000", "--steps", "200"]);
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"] == "portfolio_consistency"));
}

#[test]
fn simulate_summary() {
    let v = json(&run(&["simulate", "--model", &m("gauss.json"), "--t", "0", "--paths", "20000", "--steps", "10"]));
    assert!(v["mean"].as_f64().unwrap().abs() < 0.05);
    assert!((v["variance"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert_eq!(v["simulation"]["paths"], 20000);
}
