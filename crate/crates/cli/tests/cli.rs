use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ametric-fix")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    dir: PathBuf,
    _tmp: TempDir,
}

impl Run {
    fn report(&self) -> Value {
        let text = fs::read_to_string(self.dir.join("report.json")).expect("report written");
        serde_json::from_str(&text).unwrap()
    }

    fn csv(&self) -> String {
        fs::read_to_string(self.dir.join("trace.csv")).expect("trace written")
    }
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run_with(sub: &str, config: &str, extra: &[&str]) -> Run {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), config);
    let out = tmp.path().join("out");
    let Output { status, stdout, stderr } = Command::new(bin())
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .args(extra)
        .env_remove("AMETRIC_FIX_LOG")
        .output()
        .unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
        dir: out,
        _tmp: tmp,
    }
}

fn run(sub: &str, config: &str) -> Run {
    run_with(sub, config, &[])
}

const TWO_SEVENTHS: &str = r#"{
  "space": {"kind": "absdiff", "t": 3},
  "map": {"kind": "two_sevenths"},
  "sampling": {"seed": 11, "n_pairs": 500, "n_triples": 500, "n_tuples": 500},
  "solver": {"x0": 7.0}
}"#;

fn with_map(map: &str) -> String {
    TWO_SEVENTHS.replace(r#"{"kind": "two_sevenths"}"#, map)
}

#[test]
fn axioms_pass_on_absdiff() {
    let r = run("axioms", TWO_SEVENTHS);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), r.dir.join("report.json").display().to_string());
    let rep = r.report();
    assert_eq!(rep["verdict"], "pass");
    let names: Vec<_> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].clone()).collect();
    assert_eq!(names, ["axioms", "lemma2_symmetry", "lemma3_triangle"]);
}

#[test]
fn broken_table_fails_with_witness() {
    let cfg = r#"{
  "space": {"kind": "lifted", "t": 3, "table": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
  "map": {"kind": "constant", "value": 0},
  "sampling": {"seed": 3}
}"#;
    let r = run("axioms", cfg);
    assert_eq!(r.code, 1);
    let rep = r.report();
    assert_eq!(rep["failed_stage"], "axioms");
    let axioms = &rep["checks"][0];
    assert!(axioms["violation_count"].as_u64().unwrap() > 0);
    assert!(axioms["violations"][0]["witness"]["points"].is_array());

    // the gated constructor refuses the same table outright
    let r = run("classify", cfg);
    assert_eq!(r.code, 1);
    let rep = r.report();
    assert_eq!(rep["failed_stage"], "space");
    assert!(rep["construction_error"]["witness"].as_array().unwrap().len() >= 3);
}

#[test]
fn missing_seed_is_a_usage_error() {
    let cfg = TWO_SEVENTHS.replace(r#""seed": 11, "#, "");
    let r = run("classify", &cfg);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains(":4:"), "{}", r.stderr);
    assert!(r.stderr.contains("seed"));
    assert!(r.stdout.is_empty());

    let r = run_with("classify", &cfg, &["--seed", "9"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.report()["config"]["sampling"]["seed"], 9);
}

#[test]
fn bad_arguments_and_files_exit_two() {
    let out = Command::new(bin()).arg("classify").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin())
        .args(["solve", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let r = run("solve", &TWO_SEVENTHS.replace(r#""x0": 7.0"#, r#""max_iter": 5"#));
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("x0"));
}

#[test]
fn unknown_log_level_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TWO_SEVENTHS);
    let out = Command::new(bin())
        .args(["axioms", "--config"])
        .arg(&cfg)
        .env("AMETRIC_FIX_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_accepts_two_sevenths() {
    let r = run("classify", TWO_SEVENTHS);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cert = &r.report()["certificate"];
    assert!((cert["a"].as_f64().unwrap() - 2.0 / 7.0).abs() <= 1e-12);
    assert_eq!(cert["b"], 0.0);
    assert_eq!(cert["c"], 0.0);
    assert_eq!(cert["delta"], cert["a"]);
    for field in ["t", "exhaustive", "n_pairs", "witnesses"] {
        assert!(!cert[field].is_null(), "missing {field}");
    }
}

#[test]
fn classify_rejects_shift_with_witnesses() {
    let r = run("classify", &with_map(r#"{"kind": "shift", "by": 1.0}"#));
    assert_eq!(r.code, 1);
    let cert = &r.report()["certificate"];
    assert_eq!(cert["valid"], false);
    assert!(cert["delta"].is_null());
    let w = &cert["witnesses"][0];
    assert_eq!(w["pair"].as_array().unwrap().len(), 2);
    assert!(w["a_req"].as_f64().unwrap() >= 1.0);
}

#[test]
fn classify_constant_has_zero_constants() {
    let cfg = with_map(r#"{"kind": "constant", "value": 0.3}"#)
        .replace(r#"{"kind": "absdiff", "t": 3}"#, r#"{"kind": "absdiff", "t": 3, "box": {"lo": [0], "hi": [1]}}"#);
    let r = run("classify", &cfg);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cert = &r.report()["certificate"];
    assert_eq!(cert["a"], 0.0);
    assert_eq!(cert["delta"], 0.0);
}

#[test]
fn solve_writes_trace() {
    let r = run("solve", TWO_SEVENTHS);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lines: Vec<String> = r.stdout.lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("trace.csv"));
    let rep = r.report();
    let limit = rep["trace"]["limit"][0].as_f64().unwrap();
    assert!(limit.abs() <= 1e-11);
    let iters = rep["trace"]["iterations"].as_u64().unwrap();
    assert!((20..=40).contains(&iters), "{iters}");

    let csv = r.csv();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("n,step,bound,ratio,tail_bound"));
    let first: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "1.0000000000000000e1");
    assert_eq!(first[3], "");
    let second: Vec<&str> = rows.next().unwrap().split(',').collect();
    let ratio: f64 = second[3].parse().unwrap();
    assert!((ratio - 2.0 / 7.0).abs() <= 1e-12);
    // 17 significant digits: one leading digit and 16 after the point
    let mantissa = second[1].split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18);
}

#[test]
fn solve_at_fixed_point_stops_immediately() {
    let r = run("solve", &TWO_SEVENTHS.replace(r#""x0": 7.0"#, r#""x0": 0.0"#));
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.report()["trace"]["iterations"], 0);
    assert_eq!(r.csv().lines().count(), 1);
}

#[test]
fn solve_out_of_iterations_exits_one() {
    let r = run("solve", &TWO_SEVENTHS.replace(r#""x0": 7.0"#, r#""x0": 7.0, "max_iter": 3"#));
    assert_eq!(r.code, 1);
    let rep = r.report();
    assert_eq!(rep["trace"]["status"], "max_iter");
    assert_eq!(rep["failed_stage"], "solve");
    assert_eq!(r.csv().lines().count(), 4);
}

#[test]
fn verify_two_sevenths_passes() {
    let r = run("verify", TWO_SEVENTHS);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report();
    assert_eq!(rep["verdict"], "pass");
    let names: Vec<String> = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    for want in ["axioms", "az_conditions", "lemma1", "decay", "cauchy", "uniqueness"] {
        assert!(names.iter().any(|n| n == want), "missing {want} in {names:?}");
    }
    let cauchy = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "cauchy").unwrap();
    assert!(cauchy["metrics"]["printed_bound_rate"].is_number());
}

#[test]
fn verify_identity_fails_at_classify() {
    let r = run("verify", &with_map(r#"{"kind": "identity"}"#));
    assert_eq!(r.code, 1);
    let rep = r.report();
    assert_eq!(rep["failed_stage"], "classify");
    assert_eq!(rep["verdict"], "fail");
    assert!(rep.get("trace").is_none());
    assert!(!r.dir.join("trace.csv").exists());
}

#[test]
fn verify_finite_table_runs_oracle() {
    let cfg = r#"{
  "space": {
    "kind": "lifted",
    "t": 3,
    "table": [[0, 1, 3, 7], [1, 0, 2, 6], [3, 2, 0, 4], [7, 6, 4, 0]]
  },
  "map": {"kind": "table", "image": [0, 0, 1, 2]},
  "sampling": {"seed": 5},
  "solver": {"x0": 3}
}"#;
    let r = run("verify", cfg);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = r.report();
    assert_eq!(rep["certificate"]["exhaustive"], true);
    let oracle = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "oracle").unwrap();
    assert_eq!(oracle["passed"], true);
    assert_eq!(oracle["metrics"]["fixed_points"], 1.0);
    assert_eq!(rep["trace"]["limit"][0], 0.0);
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let a = run("verify", TWO_SEVENTHS);
    let b = run("verify", TWO_SEVENTHS);
    assert_eq!(a.code, 0);
    assert_eq!(fs::read(a.dir.join("report.json")).unwrap(), fs::read(b.dir.join("report.json")).unwrap());
    assert_eq!(a.csv(), b.csv());

    let c = run_with("verify", TWO_SEVENTHS, &["--seed", "12"]);
    assert_ne!(fs::read(a.dir.join("report.json")).unwrap(), fs::read(c.dir.join("report.json")).unwrap());
}

#[test]
fn quiet_by_default_and_logs_on_request() {
    let r = run("classify", TWO_SEVENTHS);
    assert!(r.stderr.is_empty(), "{}", r.stderr);

    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TWO_SEVENTHS);
    let out = Command::new(bin())
        .args(["classify", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(tmp.path())
        .env("AMETRIC_FIX_LOG", "debug")
        .output()
        .unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("classified"));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
}
