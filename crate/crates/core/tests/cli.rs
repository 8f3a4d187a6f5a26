use std::path::Path;
use std::process::{Command, Output};

use fairdiv::experiment::{run_config, ExperimentConfig, CSV_COLUMNS};
use fairdiv::Error;
use serde_json::Value;

fn fairdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdiv")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let out = dir.join("out");
    let body = body.replace("OUT", out.to_str().unwrap());
    std::fs::write(&path, body).unwrap();
    path
}

const ORACLE: &str = r#"{
    "n": 2, "m": 2, "a": 1.0, "b": 3.0, "family": "efe",
    "means": {"explicit": [[3.0, 1.0], [1.0, 3.0]]},
    "policy": "oracle", "horizons": [100], "seeds": [1], "output_dir": "OUT"
}"#;

#[test]
fn minimal_oracle_config_writes_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ORACLE);
    let out = fairdiv(&["simulate", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/trace_T100_seed1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# seed=1 "));
    assert_eq!(lines[1], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 102);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    let regret = summary["runs"][0]["cumulative_regret"].as_f64().unwrap();
    assert!(regret.abs() < 1e-9, "{regret}");
}

#[test]
fn trace_schema_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ORACLE.replace("oracle", "etc").replace("[100]", "[8]"));
    assert!(fairdiv(&["simulate", cfg.to_str().unwrap()]).status.success());
    let got = std::fs::read_to_string(dir.path().join("out/trace_T8_seed1.csv")).unwrap();
    let want = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/etc_T8_seed1.csv")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn summary_totals_match_the_traces() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "n": 3, "m": 2, "a": 1.0, "b": 2.0, "family": "pe",
        "means": {"random": {"seed": 4}}, "policy": "etc",
        "horizons": [200, 400], "seeds": [1, 2], "output_dir": "OUT"
    }"#;
    let cfg = ExperimentConfig::load(&write_config(dir.path(), body)).unwrap();
    let report = run_config(&cfg, true).unwrap();
    assert_eq!(report.runs.len(), 4);
    for run in &report.runs {
        let file = dir.path().join("out").join(run.trace_file.as_ref().unwrap());
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(file).unwrap();
        let headers = rdr.headers().unwrap().clone();
        let regret_col = headers.iter().position(|h| h == "per_step_regret").unwrap();
        let envy_col = headers.iter().position(|h| h == "realized_envy").unwrap();
        let (mut total, mut envy, mut rows) = (0.0, 0.0f64, 0);
        for rec in rdr.records() {
            let rec = rec.unwrap();
            total += rec[regret_col].parse::<f64>().unwrap();
            envy = envy.max(rec[envy_col].parse().unwrap());
            rows += 1;
        }
        assert_eq!(rows as u64, run.horizon);
        assert!((total - run.cumulative_regret).abs() <= 1e-9 * (1.0 + total.abs()));
        assert!((envy - run.max_realized_envy).abs() <= 1e-9);
    }
    let h200 = &report.mean_regret[0];
    assert_eq!((h200.horizon, h200.runs), (200, 2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let body = ORACLE.replace("oracle", "etc").replace("[1]", "[1, 2]");
    for dir in [&a, &b] {
        let cfg = write_config(dir.path(), &body);
        assert!(fairdiv(&["simulate", cfg.to_str().unwrap()]).status.success());
    }
    for name in ["trace_T100_seed1.csv", "trace_T100_seed2.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn bad_bounds_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [r#""a": 0.0"#, r#""a": 4.0"#, r#""a": -1.0"#] {
        let cfg = write_config(dir.path(), &ORACLE.replace(r#""a": 1.0"#, bad));
        let out = fairdiv(&["simulate", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("`a`"));
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn unknown_fields_name_their_path() {
    let err = ExperimentConfig::from_json_str(&ORACLE.replace(r#""policy""#, r#""polcy""#)).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
    let out = fairdiv(&["demo-lower-bound", "--T", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lp_and_transform_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.json");
    let y = dir.path().join("y.json");
    let lp_file = dir.path().join("prog.lp");
    std::fs::write(&mu, "[[3, 1], [1, 3]]").unwrap();
    std::fs::write(&y, "[[1, 0], [0, 1]]").unwrap();
    let (mu, y) = (mu.to_str().unwrap(), y.to_str().unwrap());

    let out = fairdiv(&["lp", "--mu", mu, "--family", "efe", "--dump-lp", lp_file.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert!(std::fs::read_to_string(&lp_file).unwrap().starts_with("Maximize"));

    let out = fairdiv(&["transform", "--mu", mu, "--y", y, "--gamma", "0.1", "--family", "pe"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["sw_loss"].as_f64().unwrap() - 0.2).abs() < 1e-9);

    // Far above the admissible envy-freeness threshold.
    let out = fairdiv(&["transform", "--mu", mu, "--y", y, "--gamma", "0.1", "--family", "efe"]);
    assert_eq!(out.status.code(), Some(1));

    let out = fairdiv(&["demo-lower-bound", "--T", "100"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["per_step_gap"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}
