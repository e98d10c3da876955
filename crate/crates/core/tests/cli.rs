mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use mafr::io::Table;
use mafr::nalgebra::DMatrix;

fn mafr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mafr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run mafr")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = mafr(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn table(path: &Path) -> Table {
    Table::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn simulate_defaults_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seed", "5", "-o", "sim"], dir.path());
    let sim = dir.path().join("sim");
    assert_eq!(csv_rows(&sim.join("dataset.csv")), 100 * 101);
    assert_eq!(
        table(&sim.join("coefficients.csv")).values.shape(),
        (100, 25)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sim.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));

    ok(&["simulate", "--num-curves", "1", "-o", "one"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("one/dataset.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("0,")));
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--seed", "12", "-o", "a"], dir.path());
    ok(&["simulate", "--seed", "12", "-o", "b"], dir.path());
    ok(&["simulate", "--seed", "13", "-o", "c"], dir.path());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("dataset.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn empty_csv_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = mafr(&["fit", "-i", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[input]") && err.contains("line 1"), "{err}");
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "curve_id,t,value\na,0,1\na,0.5,x\n",
    )
    .unwrap();
    let out = mafr(&["pipeline", "-i", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = String::from("curve_id,t,value\n");
    for p in 0..6 {
        s.push_str(&format!("a,{},{}\n", p as f64 / 5.0, p));
    }
    std::fs::write(dir.path().join("few.csv"), s).unwrap();
    let out = mafr(
        &["fit", "-i", "few.csv", "--basis", "bspline:12"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[smoothing]"));
}

#[test]
fn simulation_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--seed", "0", "-o", "sim"], d);
    ok(
        &[
            "fit",
            "-i",
            "sim/dataset.csv",
            "--basis",
            "fourier:25",
            "-o",
            "fit",
        ],
        d,
    );
    ok(
        &[
            "fpca",
            "--data",
            "fit",
            "--retain",
            "0.99",
            "-o",
            "pca",
            "--eval-grid",
            "101",
        ],
        d,
    );
    ok(
        &[
            "rotate",
            "--pca",
            "pca",
            "--penalty",
            "harmonic:1",
            "-o",
            "rot",
            "--eval-grid",
            "101",
        ],
        d,
    );
    let rot = d.join("rot");
    let k = table(&rot.join("rotation_matrix.csv")).values.nrows();
    assert!((9..=11).contains(&k), "{k} components");
    let rough = table(&rot.join("roughness.csv"));
    assert!(rough.column("mafr").unwrap()[0] <= rough.column("fpca").unwrap()[0]);
    assert_eq!(
        table(&rot.join("rotated_components_eval.csv"))
            .values
            .shape(),
        (k, 101)
    );
    check_bundle(&rot);
}

#[test]
fn demand_style_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_wide_csv(&d.join("demand.csv"), &demand_curves(120, 3));
    ok(
        &["fit", "-i", "demand.csv", "--basis", "bspline", "-o", "fit"],
        d,
    );
    ok(
        &["fpca", "--data", "fit", "--retain", "0.99", "-o", "pca"],
        d,
    );
    let all = table(&d.join("pca/components.csv")).values.nrows();
    assert!(all >= 5);
    ok(
        &[
            "rotate",
            "--pca",
            "pca",
            "--penalty",
            "d2",
            "--retain",
            "5",
            "-o",
            "rot",
        ],
        d,
    );
    let rot = d.join("rot");
    assert_eq!(table(&rot.join("rotated_components.csv")).values.nrows(), 5);
    assert_eq!(table(&rot.join("components.csv")).values.nrows(), 5);
    let rough = table(&rot.join("roughness.csv"));
    assert!(rough.column("mafr").unwrap()[0] <= rough.column("fpca").unwrap()[0]);
    check_bundle(&rot);
}

fn check_bundle(dir: &Path) {
    let u = table(&dir.join("rotation_matrix.csv")).values;
    let a = table(&dir.join("components.csv")).values;
    let psi = table(&dir.join("rotated_components.csv")).values;
    let scale = a.amax().max(1.0);
    assert!((u.transpose() * &a - &psi).amax() < 1e-10 * scale);
    let var = table(&dir.join("variances.csv"))
        .column("variance")
        .unwrap();
    let rv = table(&dir.join("rotated_variances.csv"))
        .column("variance")
        .unwrap();
    let want = (u.transpose() * DMatrix::from_diagonal(&var) * &u).diagonal();
    assert!((want - &rv).amax() < 1e-10 * var.amax());
    let s = table(&dir.join("scores.csv")).values;
    let t = table(&dir.join("rotated_scores.csv")).values;
    assert!((s * &u - t).amax() < 1e-10 * scale.max(1.0));
}

#[test]
fn pipeline_bundle_reproduces_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = ok(
        &[
            "pipeline",
            "--simulate",
            "--seed",
            "4",
            "--penalty",
            "harmonic:1",
            "-o",
            "first",
        ],
        d,
    );
    assert!(s.contains("components"));
    ok(
        &[
            "pipeline",
            "--config",
            "first/manifest.json",
            "-o",
            "second",
        ],
        d,
    );
    let files: Vec<_> = std::fs::read_dir(d.join("first"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    for name in [
        "components.csv",
        "scores.csv",
        "variances.csv",
        "rotation_matrix.csv",
        "rotated_components.csv",
        "rotated_scores.csv",
        "penalty_eigenvalues.csv",
        "rotated_variances.csv",
        "roughness.csv",
        "curves_eval.csv",
        "components_eval.csv",
        "rotated_components_eval.csv",
    ] {
        assert!(files.iter().any(|f| f == name), "{name} missing");
    }
    for f in files {
        let a = std::fs::read(d.join("first").join(&f)).unwrap();
        let b = std::fs::read(d.join("second").join(&f)).unwrap();
        assert_eq!(a, b, "{f:?} differs");
    }
    check_bundle(&d.join("first"));
}

#[test]
fn pipeline_from_config_file_on_csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_wide_csv(&d.join("demand.csv"), &demand_curves(80, 8));
    let config = serde_json::json!({
        "input": "demand.csv",
        "basis": {"kind": "bspline", "interval": [0.25, 23.75], "order": 4, "num_basis": 16},
        "retain": {"fraction": 0.99},
        "rotate_components": 5,
        "penalty": "d2",
        "ordering": "smooth-first",
        "output_dir": "out",
        "eval_grid": 48
    });
    std::fs::write(d.join("run.json"), config.to_string()).unwrap();
    ok(&["pipeline", "--config", "run.json"], d);
    let out = d.join("out");
    assert_eq!(
        table(&out.join("rotation_matrix.csv")).values.shape(),
        (5, 5)
    );
    assert_eq!(
        table(&out.join("components_eval.csv")).values.shape(),
        (5, 48)
    );
    assert_eq!(table(&out.join("curves_eval.csv")).values.shape(), (80, 48));
    check_bundle(&out);
}

#[test]
fn joint_weights_and_rough_first() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "pipeline",
            "--simulate",
            "--retain",
            "4",
            "--penalty",
            "d2",
            "--ordering",
            "rough-first",
            "-o",
            "r",
        ],
        d,
    );
    let ev = table(&d.join("r/penalty_eigenvalues.csv"))
        .column("eigenvalue")
        .unwrap();
    assert!(ev.as_slice().windows(2).all(|w| w[0] >= w[1]));
    ok(
        &[
            "pipeline",
            "--simulate",
            "--retain",
            "4",
            "--weights",
            "1,2,3,4",
            "-o",
            "j",
        ],
        d,
    );
    check_bundle(&d.join("j"));
    let out = mafr(
        &[
            "pipeline",
            "--simulate",
            "--retain",
            "4",
            "--weights",
            "1,2",
            "-o",
            "bad",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
}
