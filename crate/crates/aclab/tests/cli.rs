use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aclab")).args(args).output().expect("binary runs")
}

fn gen(dir: &Path, name: &str, states: &str, actions: &str, seed: &str) -> String {
    let path = dir.join(name);
    let out = aclab(&["gen-mdp", "--states", states, "--actions", actions, "--seed", seed, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn gen_mdp_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "4", "3", "11");
    let b = gen(dir.path(), "b.json", "4", "3", "11");
    let c = gen(dir.path(), "c.json", "4", "3", "12");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn gen_mdp_rejects_bad_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let out = aclab(&["gen-mdp", "--states", "0", "--actions", "2", "--out", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!path.exists());
}

#[test]
fn run_writes_csvs_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "mdp.json", "3", "2", "1");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"mdp_path": "mdp.json", "run": {"horizon": 200, "n_seeds": 3, "diag_every": 50, "seed": 4}}"#).unwrap();
    let out = aclab(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let seeds = fs::read_to_string(out_dir.join("run_seeds.csv")).unwrap();
    let rows: Vec<&str> = seeds.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "k,seed,a_k,z_k,y_k,x_k,eta_k,beta_k");
    assert_eq!(rows.len(), 1 + 5 * 3);
    assert!(seeds.contains("# master_seed: 4"));
    assert!(out_dir.join("run_mean.csv").exists());
    assert!(out_dir.join("run_summary.json").exists());
    let m = manifest(&out_dir);
    assert_eq!(m["command"], "run");
    assert_eq!(m["files"].as_array().unwrap().len(), 3);
}

#[test]
fn run_rejects_unknown_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "mdp.json", "2", "2", "1");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"mdp_path": "mdp.json", "run": {"horizon": 10}, "typo": 1}"#).unwrap();
    let out = aclab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo"));
}

#[test]
fn sweep_writes_one_leg_per_exponent_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "mdp.json", "3", "2", "2");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"mdp_path": "mdp.json", "run": {"horizon": 100, "n_seeds": 2, "diag_every": 25}, "output_dir": "sw"}"#).unwrap();
    let out = aclab(&["sweep", "--config", cfg.to_str().unwrap(), "--exponents", "0.5,1", "--sampling", "uniform"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("sw");
    for stem in ["sweep_a0.500", "sweep_a1.000"] {
        assert!(out_dir.join(format!("{stem}_seeds.csv")).exists(), "{stem}");
    }
    let svg = fs::read_to_string(out_dir.join("sweep.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    let m = manifest(&out_dir);
    assert_eq!(m["files"].as_array().unwrap().len(), 5);
    assert!(m.get("errors").is_none());
}

#[test]
fn check_all_passes_on_single_state_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = gen(dir.path(), "mdp.json", "1", "1", "0");
    let report = dir.path().join("report.json");
    let out = aclab(&["check-all", "--mdp", &mdp, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
}

#[test]
fn check_all_exits_two_on_assumption_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mdp.json");
    gen(dir.path(), "mdp.json", "2", "2", "3");
    let mut m: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    m["initial_dist"] = serde_json::json!([1.0, 0.0]);
    fs::write(&path, m.to_string()).unwrap();
    let out = aclab(&["check-all", "--mdp", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("AssumptionViolated"));
}

#[test]
fn missing_mdp_file_is_an_error() {
    let out = aclab(&["check-all", "--mdp", "/nonexistent/mdp.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lyapunov_recursion_certifies_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = aclab(&["recursion", "--mode", "lyapunov", "--horizon", "1000", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("lyapunov.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,u_k,alpha_bound,eta_k"));
    assert_eq!(csv.lines().count(), 1 + 1001);
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lyapunov.json")).unwrap()).unwrap();
    assert_eq!(rep["certified"], true);
    assert_eq!(manifest(dir.path())["files"].as_array().unwrap().len(), 2);
}

#[test]
fn coupled_recursion_with_fixed_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = aclab(&[
        "recursion",
        "--mode",
        "coupled",
        "--horizon",
        "100",
        "--constants",
        "1,0,0,1,0,0,0,1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("coupled.json")).unwrap()).unwrap();
    let d = &rep["draws"][0];
    assert_eq!(d["lyapunov_nonincreasing_after_50"], true);
    assert_eq!(d["actor_nonmonotone"], false);

    let out = aclab(&["recursion", "--mode", "coupled", "--constants", "1,2,3", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixed_eval_reports_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = gen(dir.path(), "mdp.json", "3", "2", "5");
    let report = dir.path().join("fe.json");
    let out = aclab(&["fixed-eval", "--mdp", &mdp, "--trials", "5", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rep["violations"], 0);
    assert!(rep["max_ratio"].as_f64().unwrap() <= rep["bound"].as_f64().unwrap());
}
