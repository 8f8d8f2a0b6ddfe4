use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn collbreak(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collbreak"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    fs::write(dir.join(name), json).unwrap();
    name.to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_defaults_follow_number_growth() {
    let tmp = TempDir::new().unwrap();
    let out = collbreak(tmp.path(), &["run", "--out", "r"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let moments = csv_rows(&tmp.path().join("r/moments.csv"));
    let last = moments.last().unwrap();
    assert_eq!(last[0].parse::<f64>().unwrap(), 1.0);
    let density = csv_rows(&tmp.path().join("r/density.csv"));
    let a: f64 = density.last().unwrap()[2].parse().unwrap();
    let m0: f64 = last[1].parse().unwrap();
    assert!((m0 - (1.0 + a * a)).abs() < 1e-6, "M0 = {m0}, a = {a}");

    let diag = json(&tmp.path().join("r/diagnostics.json"));
    assert!(diag["relative_mass_drift"].as_f64().unwrap().abs() < 1e-12);
    assert!(diag["boundary"]["leaked_number"].as_f64().unwrap() >= 0.0);
    assert_eq!(diag["integration"]["negativity_clip_events"], 0);
}

#[test]
fn floats_carry_seventeen_digits() {
    let tmp = TempDir::new().unwrap();
    assert!(collbreak(tmp.path(), &["run", "--out", "r", "--quiet"]).status.success());
    let moments = csv_rows(&tmp.path().join("r/moments.csv"));
    for field in &moments[1][1..] {
        let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}

#[test]
fn midpoint_reports_mass_drift() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"scheme": "midpoint"}"#);
    let out = collbreak(tmp.path(), &["run", "--config", &cfg, "--out", "r", "--quiet"]);
    assert!(out.status.success());
    let diag = json(&tmp.path().join("r/diagnostics.json"));
    assert!(diag["relative_mass_drift"].as_f64().unwrap().abs() > 1e-4);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        r#"{"kernel": "product_xy/no_such_breakage"}"#,
        r#"{"kernal": "product_xy/binary_2_over_y"}"#,
        r#"{"grid": {"family": "random"}}"#,
        r#"{"grid": {"family": "uniform", "seed": 3}}"#,
        r#"{"dimension": 2}"#,
        r#"{"integrator": {"t_end": -1}}"#,
        r#"{ not json"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), text);
        let out = collbreak(tmp.path(), &["run", "--config", &cfg, "--out", "r"]);
        assert_eq!(out.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = collbreak(tmp.path(), &["run", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_steps_abort_with_exit_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"integrator": {"method": "rk4_fixed", "dt": 20.0, "t_end": 100.0}}"#,
    );
    let out = collbreak(tmp.path(), &["run", "--config", &cfg, "--out", "r"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("negative state at t = "), "{err}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"grid": {"family": "random", "cells": 40}, "integrator": {"t_end": 2.0, "observe_every": 0.5}}"#,
    );
    for dir in ["a", "b"] {
        let out = collbreak(tmp.path(), &["run", "--config", &cfg, "--seed", "7", "--out", dir, "--quiet"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["moments.csv", "density.csv", "diagnostics.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn single_doubling_gives_two_rows() {
    let tmp = TempDir::new().unwrap();
    let out = collbreak(tmp.path(), &["eoc", "--doublings", "1", "--seed", "42", "--out", "e", "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&tmp.path().join("e/eoc.csv"));
    for family in ["geometric", "uniform", "locally_uniform", "random"] {
        let mine: Vec<_> = rows.iter().filter(|r| r[0] == family).collect();
        assert_eq!(mine.len(), 2, "{family}");
        assert_eq!(mine[0][3].parse::<f64>().unwrap(), 0.0);
    }
    let md = fs::read_to_string(tmp.path().join("e/eoc.md")).unwrap();
    assert!(md.contains("| Grids | Nonuniform L1 error | EOC | Uniform L1 error | EOC |"), "{md}");
}

#[test]
fn eoc_without_seed_for_random_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = collbreak(tmp.path(), &["eoc", "--doublings", "1", "--out", "e"]);
    assert_eq!(out.status.code(), Some(2));
}

fn final_eoc(dir: &Path) -> f64 {
    csv_rows(&dir.join("eoc.csv")).last().unwrap()[3].parse().unwrap()
}

#[test]
fn uniform_first_order_study() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"eoc": {"families": ["uniform"]}}"#);
    let out = collbreak(tmp.path(), &["eoc", "--config", &cfg, "--out", "e", "--quiet"]);
    assert!(out.status.success());
    let e = final_eoc(&tmp.path().join("e"));
    assert!((e - 1.01).abs() <= 0.15, "EOC {e}");
}

#[test]
fn parabolic_second_order_study() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kernel": "product_xy/parabolic_12x", "eoc": {"families": ["locally_uniform"]}}"#,
    );
    let out = collbreak(tmp.path(), &["eoc", "--config", &cfg, "--out", "e", "--quiet"]);
    assert!(out.status.success());
    let e = final_eoc(&tmp.path().join("e"));
    assert!((e - 1.98).abs() <= 0.2, "EOC {e}");
    let md = fs::read_to_string(tmp.path().join("e/eoc.md")).unwrap();
    assert!(md.contains("Locally uniform* L1 error"));
}

#[test]
fn random_grid_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"grid": {"family": "random", "x_min": 0.0}}"#);
    for dir in ["a", "b"] {
        let out = collbreak(tmp.path(), &["grid", "--config", &cfg, "--seed", "42", "--out", dir, "--quiet"]);
        assert!(out.status.success());
    }
    let a = fs::read(tmp.path().join("a/grid.json")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b/grid.json")).unwrap());
    let record = json(&tmp.path().join("a/grid.json"));
    assert_eq!(record["kind"], "random");
    assert_eq!(record["seed"], 42);
    let b: Vec<f64> = record["boundaries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(b.len(), 31);
    let w: Vec<f64> = b.windows(2).map(|p| p[1] - p[0]).collect();
    let ratio = w.iter().cloned().fold(0.0, f64::max) / w.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(ratio <= 4.0);
    assert_eq!(csv_rows(&tmp.path().join("a/grid.csv")).len(), 31);
}

#[test]
fn validate_kernel_reports() {
    let tmp = TempDir::new().unwrap();
    let out = collbreak(tmp.path(), &["validate-kernel", "product_xy/binary_2_over_y", "--out", "v"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("MassIdentity"));
    let report = json(&tmp.path().join("v/validation.json"));
    assert_eq!(report["kernel"], "product_xy/binary_2_over_y");
    assert!(tmp.path().join("v/validation.txt").exists());

    let out = collbreak(tmp.path(), &["validate-kernel", "constant_one/quartic_4x2_over_y3", "--out", "v", "--quiet"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(tmp.path().join("v/validation.txt")).unwrap();
    assert!(text.contains("warn"));

    let out = collbreak(tmp.path(), &["validate-kernel", "bogus", "--out", "v"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_dimensional_run_conserves_axis_masses() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"dimension": 2, "scheme": "vam2d", "kernel": "product_4d/uniform_2_over_y1y2",
            "grid": {"cells": 12}, "integrator": {"observe_every": 0.5}}"#,
    );
    let out = collbreak(tmp.path(), &["run", "--config", &cfg, "--out", "r", "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = json(&tmp.path().join("r/diagnostics.json"));
    assert!(diag["relative_drift"]["m10"].as_f64().unwrap().abs() < 1e-8);
    assert!(diag["relative_drift"]["m01"].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(csv_rows(&tmp.path().join("r/moments.csv")).len(), 3);
    assert_eq!(csv_rows(&tmp.path().join("r/density.csv")).len(), 3 * 144);
}
