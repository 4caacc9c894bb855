use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(dir: &Path, config: &Value, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_penreg"))
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn simulate(replications: usize) -> Value {
    json!({
        "command": "simulate",
        "problem": {
            "source": "orthonormal", "n": 32, "sigma": 1.0,
            "support": [2, 9], "magnitude": 1.5, "design_seed": 3
        },
        "penalty": { "kind": "l1" },
        "monte_carlo": { "replications": replications },
        "seed": 5,
        "output_dir": "out"
    })
}

#[test]
fn orthonormal_coverage_scenario_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &simulate(2000), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let coverage = read(&out, "coverage.csv");
    let lines: Vec<&str> = coverage.lines().collect();
    assert_eq!(lines[0], "delta,bound,violations,pass");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
    for name in [
        "errors.csv",
        "tails.csv",
        "tails_mean.csv",
        "expectation.csv",
        "events.csv",
        "summary.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(
        read(&out, "events.csv").lines().next(),
        Some("event,frequency,pass")
    );
    let summary: Value = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    assert_eq!(summary["certifying"], json!(true));
    let manifest: Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["seeds"]["base"], json!(5));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["exit_code"], json!(0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = simulate(300);
    assert_eq!(
        run(dir.path(), &cfg, &["--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run(dir.path(), &cfg, &["--out", b.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    for name in [
        "errors.csv",
        "tails.csv",
        "tails_mean.csv",
        "coverage.csv",
        "expectation.csv",
        "events.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let ma: Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    let mb: Value = serde_json::from_str(&read(&b, "manifest.json")).unwrap();
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn floats_have_seventeen_significant_digits() {
    let dir = TempDir::new().unwrap();
    run(dir.path(), &simulate(100), &[]);
    let errors = read(&dir.path().join("out"), "errors.csv");
    let field = errors.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = simulate(100);
    run(dir.path(), &cfg, &["--out", a.to_str().unwrap()]);
    run(
        dir.path(),
        &cfg,
        &["--out", b.to_str().unwrap(), "--seed", "99"],
    );
    assert_ne!(read(&a, "errors.csv"), read(&b, "errors.csv"));
    let mb: Value = serde_json::from_str(&read(&b, "manifest.json")).unwrap();
    assert_eq!(mb["seeds"]["base"], json!(99));
    let ma: Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn manifest_hash_tracks_config_content() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(dir.path(), &simulate(100), &["--out", a.to_str().unwrap()]);
    run(dir.path(), &simulate(101), &["--out", b.to_str().unwrap()]);
    let ma: Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    let mb: Value = serde_json::from_str(&read(&b, "manifest.json")).unwrap();
    assert_ne!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn empty_tail_grid_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate(100);
    cfg["monte_carlo"]["t_grid"] = json!([]);
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        read(&dir.path().join("out"), "tails.csv"),
        "t,empirical,bound,slack,pass\n"
    );
}

#[test]
fn coverage_rows_follow_grid_order() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate(200);
    cfg["monte_carlo"]["delta_grid"] = json!([0.01, 0.5, 0.1]);
    run(dir.path(), &cfg, &[]);
    let coverage = read(&dir.path().join("out"), "coverage.csv");
    let deltas: Vec<f64> = coverage
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(deltas, vec![0.01, 0.5, 0.1]);
}

#[test]
fn missing_sigma_is_a_field_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = simulate(100);
    cfg["problem"].as_object_mut().unwrap().remove("sigma");
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("problem") && msg.contains("sigma"), "{msg}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn validation_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let mut unknown = simulate(100);
    unknown["penalty"]["lamda"] = json!(0.1);
    let o = run(dir.path(), &unknown, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));

    let mut few = simulate(100);
    few["monte_carlo"]["replications"] = json!(10);
    let o = run(dir.path(), &few, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("monte_carlo"), "{}", stderr(&o));

    let mut no_out = simulate(100);
    no_out.as_object_mut().unwrap().remove("output_dir");
    let o = run(dir.path(), &no_out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("output_dir"));

    let o = run(
        dir.path(),
        &json!({ "command": "solve", "output_dir": "out" }),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem"));

    let o = run(
        dir.path(),
        &json!({ "command": "fit", "output_dir": "out" }),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("command"));

    let file = json!({
        "command": "solve",
        "problem": { "source": "file", "path": "missing.json" },
        "penalty": { "kind": "l1" },
        "output_dir": "out"
    });
    let o = run(dir.path(), &file, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"));
}

fn gaussian(command: &str) -> Value {
    json!({
        "command": command,
        "problem": {
            "source": "gaussian", "n": 20, "p": 30, "sigma": 1.0,
            "sparsity": 3, "magnitude": 2.0, "design_seed": 1
        },
        "penalty": { "kind": "l1" },
        "geometry": { "instances": 3, "pairs": 20 },
        "output_dir": "out"
    })
}

#[test]
fn verify_geometry_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &gaussian("verify-geometry"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(&dir.path().join("out"), "geometry.csv");
    let checks: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        checks,
        [
            "projection_identity",
            "contraction",
            "firm_nonexpansiveness"
        ]
    );
}

#[test]
fn solve_writes_documents_and_flags_truncation() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &gaussian("solve"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let problem: Value = serde_json::from_str(&read(&out, "problem.json")).unwrap();
    assert_eq!(problem["n"], json!(20));
    assert_eq!(problem["y"].as_array().unwrap().len(), 20);
    let solution: Value = serde_json::from_str(&read(&out, "solution.json")).unwrap();
    assert_eq!(solution["converged"], json!(true));
    assert_eq!(solution["penalty"]["kind"], json!("l1"));

    // The stored document reproduces the same solve.
    let again = json!({
        "command": "solve",
        "problem": { "source": "file", "path": "out/problem.json" },
        "penalty": { "kind": "l1", "lambda": solution["penalty"]["lambda"] },
        "output_dir": "again"
    });
    let o = run(dir.path(), &again, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let second: Value =
        serde_json::from_str(&read(&dir.path().join("again"), "solution.json")).unwrap();
    assert_eq!(second["result"]["beta_hat"], solution["result"]["beta_hat"]);

    let mut short = gaussian("solve");
    short["solver"] = json!({ "max_iters": 3 });
    let o = run(dir.path(), &short, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(read(&out, "checks.csv").contains("false"));
}

#[test]
fn constants_csv_columns() {
    let dir = TempDir::new().unwrap();
    let mut cfg = gaussian("constants");
    cfg["constants"] = json!({ "c0_grid": [1.0, 3.0], "re": { "starts": 16 } });
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(&dir.path().join("out"), "constants.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kind,S,c0,value,status,starts");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("re,0;1;2,"));
    assert!(lines[1].ends_with(",multistart-estimate,16"));
}

#[test]
fn report_aggregates_pass_columns() {
    let dir = TempDir::new().unwrap();
    let arts = dir.path().join("arts");
    fs::create_dir_all(&arts).unwrap();
    fs::write(
        arts.join("tails.csv"),
        "t,empirical,bound,slack,pass\n1,0.1,0.2,0.01,true\n",
    )
    .unwrap();
    let cfg = json!({ "command": "report", "report_dir": "arts", "output_dir": "rep" });
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    fs::write(
        arts.join("coverage.csv"),
        "delta,bound,violations,pass\n0.1,1.0,0.5,false\n",
    )
    .unwrap();
    let o = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value =
        serde_json::from_str(&read(&dir.path().join("rep"), "report.json")).unwrap();
    assert_eq!(report["pass"], json!(false));

    let empty = json!({ "command": "report", "report_dir": "nothing", "output_dir": "rep" });
    assert_eq!(run(dir.path(), &empty, &[]).status.code(), Some(2));
}
