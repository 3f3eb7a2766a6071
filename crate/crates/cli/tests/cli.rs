//! End-to-end runs of the `femtogame` binary.

use std::path::Path;
use std::process::{Command, Output};

fn femtogame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_femtogame")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str =
    r#"{ "num_followers": 3, "k_values": [3], "discrete_sweep_points": 6, "search": { "mc_trials": 2 } }"#;

#[test]
fn generate_is_seeded_json() {
    let a = femtogame(&["generate", "--seed", "4"]);
    let b = femtogame(&["generate", "--seed", "4"]);
    let c = femtogame(&["generate", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["gain"].as_array().unwrap().len(), 7);

    let with_layout = femtogame(&["generate", "--seed", "4", "--layout"]);
    let v: serde_json::Value = serde_json::from_slice(&with_layout.stdout).unwrap();
    assert_eq!(v["layout"]["access_points"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let first = femtogame(&["sweep", "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("lambda,revenue,mean_efficiency,macro_sinr,rounds,converged\n"));
    assert!(text.lines().count() > 60);
    let again = femtogame(&["price-sweep", "--seed", "2"]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn search_and_asymptote_report_every_link() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let search = femtogame(&["search", "--config", &cfg, "--per-link"]);
    assert!(search.status.success());
    let v: serde_json::Value = serde_json::from_slice(&search.stdout).unwrap();
    assert_eq!(v["prices"].as_array().unwrap().len(), 3);
    assert!(v["revenue"].as_f64().unwrap() > 0.0);

    let asym = femtogame(&["asymptote", "--config", &cfg]);
    assert!(asym.status.success());
    assert_eq!(String::from_utf8(asym.stdout).unwrap().lines().count(), 1 + 3);
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("nested").join("fig1.csv");
    let run =
        femtogame(&["experiment", "fig1-sweep", "--config", &cfg, "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = std::fs::read_to_string(&out).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("nested").join("fig1.summary.csv")).unwrap();
    assert!(rows.starts_with("experiment,seed,config_hash,lambda,"));
    assert!(summary.lines().nth(1).unwrap().starts_with("fig1-sweep,"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(femtogame(&["experiment", "fig9"]).status.code(), Some(2));
    let bad = write_config(dir.path(), r#"{ "bogus": 1 }"#);
    assert_eq!(femtogame(&["sweep", "--config", &bad]).status.code(), Some(2));
    let negative = write_config(dir.path(), r#"{ "learner": { "tau": -1 } }"#);
    assert_eq!(femtogame(&["learn", "--config", &negative]).status.code(), Some(2));
    assert_eq!(femtogame(&["learn", "--lambda", "-5"]).status.code(), Some(2));
    assert_eq!(femtogame(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn unconverged_learning_exits_with_3_after_writing_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "num_followers": 2, "k_values": [2], "learner": { "max_iters": 10 } }"#);
    let out = dir.path().join("trace.csv");
    let run = femtogame(&["learn", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 10 * 2);
}
