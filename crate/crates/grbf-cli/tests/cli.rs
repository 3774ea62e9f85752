use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn grbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grbf")).args(args).output().expect("spawn grbf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("grbf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// `d.dddddddddddde±x`: 13 significant digits in scientific notation.
fn is_sci(field: &str) -> bool {
    let Some((mantissa, exp)) = field.split_once('e') else { return false };
    let mantissa = mantissa.strip_prefix('-').unwrap_or(mantissa);
    let digits_ok = matches!(mantissa.split_once('.'), Some((a, b)) if a.len() == 1 && b.len() == 12
        && a.chars().chain(b.chars()).all(|c| c.is_ascii_digit()));
    digits_ok && exp.parse::<i32>().is_ok()
}

#[test]
fn selftest_passes_and_detects_mutation() {
    let o = grbf(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("suite,passed,failed\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")), "{csv}");
    assert_eq!(stderr_json(&o)["ok"], Value::Bool(true));

    let m = grbf(&["selftest", "--mutate"]);
    assert_eq!(m.status.code(), Some(1));
    assert_eq!(stderr_json(&m)["ok"], Value::Bool(false));
}

#[test]
fn convergence_rows_follow_sizes() {
    let o = grbf(&["convergence", "--problem", "1", "--n", "16"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, vec!["n,rel_mse_solve,kappa", lines[1]]);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "16");
    assert!(is_sci(fields[1]) && is_sci(fields[2]), "{}", lines[1]);
    let e: f64 = fields[1].parse().unwrap();
    assert!(e > 2.0914e-6 && e < 2.0914e-4);

    let o = grbf(&["convergence", "--problem", "1", "--n-min", "8", "--n-max", "32"]);
    let csv = stdout(&o);
    let ns: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["8", "16", "32"]);
}

#[test]
fn train_with_one_step_writes_one_row() {
    let out = scratch("trace.csv");
    let o = grbf(&["train", "--problem", "1", "--n", "8", "--steps", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "step,loss,kappa");
    assert!(lines[1].starts_with("0,"));
    assert!(lines[1].split(',').skip(1).all(is_sci));
    // With --out the summary goes to stdout.
    let summary = stdout_json(&o);
    assert_eq!(summary["records"], 1);
    assert_eq!(summary["stop"], "max_steps");
}

#[test]
fn invalid_settings_exit_with_error() {
    assert_eq!(grbf(&["train", "--problem", "1", "--n", "8", "--steps", "0"]).status.code(), Some(2));
    assert_eq!(grbf(&["convergence", "--problem", "1", "--n", "0"]).status.code(), Some(2));
    assert_eq!(grbf(&["train", "--problem", "1", "--n", "8", "--optimizer", "sgd"]).status.code(), Some(2));
    assert_ne!(grbf(&["solve", "--problem", "7", "--n", "8"]).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let path = scratch("run.cfg");
    std::fs::write(&path, "# defaults for this run\nproblem=2\nn=8\nseed=4\n").unwrap();
    let cfg = path.to_str().unwrap();
    // solve writes no CSV, so its summary is on stdout.
    let from_file = stdout_json(&grbf(&["solve", "--config", cfg]));
    assert_eq!((from_file["problem"].clone(), from_file["n"].clone()), (Value::from(2), Value::from(8)));
    assert_eq!(from_file["seed"], 4);
    assert_eq!(from_file["gamma"], 128.0);
    let o = grbf(&["solve", "--config", cfg, "--n", "16", "--gamma", "10"]);
    let flagged = stdout_json(&o);
    assert_eq!(flagged["n"], 16);
    assert_eq!(flagged["seed"], 4);
    assert_eq!(flagged["gamma"], 10.0);
}

#[test]
fn whitney_is_deterministic() {
    let a = grbf(&["whitney", "--n", "6", "--seed", "3"]);
    let b = grbf(&["whitney", "--n", "6", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let s = stdout_json(&a);
    assert!(s["total"].as_f64().unwrap().is_finite());

    let pair = stdout_json(&grbf(&["whitney", "--exact-pair"]));
    assert!(pair["mse_f"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn help_documents_csv_schemas() {
    let text = stdout(&grbf(&["--help"]));
    for schema in ["suite,passed,failed", "n,rel_mse_solve,kappa", "step,loss,kappa"] {
        assert!(text.contains(schema), "{schema}");
    }
}
