use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use layerpot_cli::ReportBundle;
use layerpot_core::measures::{DiscreteMeasure, MeasureFamily};

fn layerpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerpot")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_experiment_exits_with_config_error() {
    let out = layerpot(&["run", "--experiment", "warp-drive", "--out-dir", "/tmp/never-written"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown experiment") && err.contains("compare-TR"), "{err}");
}

#[test]
fn bad_flags_and_thread_settings_are_usage_errors() {
    assert_eq!(layerpot(&["opnorm"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_layerpot"))
        .env("LAYERPOT_THREADS", "many")
        .args(["run", "--experiment", "kernel-identities"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_measure_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.json");
    let out = layerpot(&["gen-measure", "--family", "plane-patch", "--n", "6", "--out", path(&file)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: DiscreteMeasure = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(m, DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: 6 }, 0).unwrap());

    let out =
        layerpot(&["gen-measure", "--family", "lacunary", "--level", "4", "--out", path(&dir.path().join("l.json"))]);
    assert!(out.status.success());
}

#[test]
fn opnorm_of_two_atoms_is_one_and_compare_writes_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("two.json");
    fs::write(&m, r#"{"points": [[0,0,0],[1,0,0]], "weights": [1,1]}"#).unwrap();
    let csv = dir.path().join("norm.csv");
    for method in ["power", "svd"] {
        let out = layerpot(&[
            "opnorm",
            "--measure",
            path(&m),
            "--delta-grid",
            "0.5",
            "--method",
            method,
            "--tol",
            "1e-10",
            "--out",
            path(&csv),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(&csv).unwrap();
        let sigma: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((sigma - 1.0).abs() < 1e-10, "{method}: {sigma}");
    }
    let bad = layerpot(&["opnorm", "--measure", path(&m), "--tol", "0", "--out", path(&csv)]);
    assert_eq!(bad.status.code(), Some(2));

    let field = dir.path().join("field.json");
    fs::write(&field, r#"{"family": "log_dini", "gamma": 0.25}"#).unwrap();
    let pm = dir.path().join("pp.json");
    assert!(layerpot(&["gen-measure", "--family", "plane-patch", "--n", "6", "--out", path(&pm)]).status.success());
    let out_csv = dir.path().join("cmp.csv");
    let out = layerpot(&[
        "compare",
        "--measure",
        path(&pm),
        "--field",
        path(&field),
        "--delta-grid",
        "auto:3",
        "--normalize",
        "--out",
        path(&out_csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "delta,norm_T,norm_R,diff_norm,ratio");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn run_is_reproducible_and_plotdata_extracts_series() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = layerpot(&[
            "run",
            "--experiment",
            "dini-calculus",
            "--seed",
            "11",
            "--param",
            "grid_points=8",
            "--out-dir",
            path(d),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let sa = fs::read(a.join("summary.json")).unwrap();
    assert_eq!(sa, fs::read(b.join("summary.json")).unwrap());
    let report: ReportBundle = serde_json::from_slice(&sa).unwrap();
    assert_eq!(report.seed, 11);
    assert_eq!(report.schema_version, 1);
    let digest = fs::read_to_string(a.join("digest.txt")).unwrap();
    assert!(digest.contains("(checks.csv row 1)"));
    assert!(a.join("checks.csv").exists() && a.join("dini.csv").exists());

    let plots = dir.path().join("plots");
    let summary = a.join("summary.json");
    let out =
        layerpot(&["plotdata", "--summary", path(&summary), "--select", "r,rel_error", "--out-dir", path(&plots)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(plots.join("rel_error_vs_r.csv")).unwrap();
    assert!(text.starts_with("r,rel_error\n") && text.lines().count() > 1);

    let out =
        layerpot(&["plotdata", "--summary", path(&summary), "--select", "j,max_coeff", "--out-dir", path(&plots)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dini:rel_error"));
}

#[test]
fn plotdata_of_an_empty_report_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let empty = ReportBundle::new("sph-decay", 0, serde_json::json!({}));
    fs::write(&summary, serde_json::to_string(&empty).unwrap()).unwrap();
    let out =
        layerpot(&["plotdata", "--summary", path(&summary), "--select", "j,max_coeff", "--out-dir", path(dir.path())]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("max_coeff_vs_j.csv")).unwrap(), "j,max_coeff\n");
}

#[test]
fn config_file_with_missing_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "criterion", "inputs": {"measure": "/nonexistent/m.json"}}"#).unwrap();
    let out = layerpot(&["run", "--config", path(&cfg), "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/m.json"));
}
