use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use linf_core::grid::{build_grid, write_field_csv, ScalarField};

const BIN: &str = env!("CARGO_BIN_EXE_linfvar");

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, nodes: usize, boundary: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        r#"{{
  "domain": {{"lower": [0.0], "upper": [1.0], "nodes": [{nodes}]}},
  "matrix": [[1.0]],
  "supremand": {{"family": "pure_xi"}},
  "boundary": {boundary}
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn quadratic(dir: &Path) -> PathBuf {
    write_config(dir, "quadratic.json", 101, r#"{"kind": "interval", "ua": 0.0, "dua": 0.0, "ub": 1.0, "dub": 2.0}"#)
}

fn golden(dir: &Path) -> PathBuf {
    write_config(dir, "golden.json", 201, r#"{"kind": "interval", "ua": 0.0, "dua": 0.0, "ub": 0.0, "dub": 1.0}"#)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sweep_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,e_p,sign_law_residual,nodal_count"));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn solve_quadratic_data_reproduces_constant_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = quadratic(tmp.path());
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    for f in ["report.json", "u.csv", "f.csv", "certification.json", "timing.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let rep = json(&out.join("report.json"));
    let stages = rep["continuation"]["stages"].as_array().unwrap();
    assert!(!stages.is_empty());
    for st in stages {
        assert!((st["e_p"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    }
    let cert = json(&out.join("certification.json"));
    assert_eq!(cert["verdict"], "pass");
}

#[test]
fn solve_zero_data_skips_duals() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.json", 41, r#"{"kind": "zero"}"#);
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    assert!(json(&out.join("report.json"))["duals"].is_null());
    let cert = json(&out.join("certification.json"));
    assert_eq!(cert["f_inf"].as_f64(), Some(0.0));
    assert_eq!(cert["degenerate"], true);
}

#[test]
fn malformed_config_names_the_missing_field() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(
        &path,
        r#"{"domain": {"lower": [0.0], "upper": [1.0], "nodes": [41]},
            "supremand": {"family": "pure_xi"}, "boundary": {"kind": "zero"}}"#,
    )
    .unwrap();
    let o = run(&["solve", "--config", "bad.json", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("matrix"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn invalid_ladder_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = quadratic(tmp.path());
    let o = run(
        &["solve", "--config", cfg.to_str().unwrap(), "--out", "out", "--ladder", "4,2"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = golden(tmp.path());
    let c = cfg.to_str().unwrap();
    run(&["solve", "--config", c, "--out", "a", "--seed", "7"], tmp.path());
    run(&["solve", "--config", c, "--out", "b", "--seed", "7"], tmp.path());
    for f in ["report.json", "certification.json", "u.csv", "f.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn solve_writes_only_inside_out_dir() {
    let tmp = TempDir::new().unwrap();
    let cfg = golden(tmp.path());
    run(
        &["solve", "--config", cfg.to_str().unwrap(), "--out", "out", "--emit-fields", "--ladder", "2,4,8"],
        tmp.path(),
    );
    let mut top: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    top.sort();
    assert_eq!(top, ["golden.json", "out"]);
    let fields = tmp.path().join("out").join("fields");
    for p in ["2", "4", "8"] {
        assert!(fields.join(format!("u_p{p}.csv")).exists());
    }
}

#[test]
fn sweep_traces() {
    let tmp = TempDir::new().unwrap();
    let q = quadratic(tmp.path());
    let o = run(&["sweep", "--config", q.to_str().unwrap(), "--out", "q"], tmp.path());
    assert_eq!(code(&o), 0);
    for row in sweep_rows(&tmp.path().join("q").join("sweep.csv")) {
        assert!((row[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-8);
    }

    let g = golden(tmp.path());
    let o = run(&["sweep", "--config", g.to_str().unwrap(), "--out", "g"], tmp.path());
    assert_eq!(code(&o), 0);
    let rows = sweep_rows(&tmp.path().join("g").join("sweep.csv"));
    assert!(rows.len() > 1);
    let e: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] >= w[0] - 1e-6));

    let o = run(
        &["sweep", "--config", g.to_str().unwrap(), "--out", "one", "--ladder", "4"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(sweep_rows(&tmp.path().join("one").join("sweep.csv")).len(), 1);
}

fn write_field(path: &Path, f: &ScalarField) {
    write_field_csv(f, fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn verify_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let g = golden(tmp.path());
    let grid = std::sync::Arc::new(build_grid(1, &[0.0], &[1.0], &[201]).unwrap());
    // closed form for data (0, 0, 0, 1): s = 1 + √2, kink at 1 - 1/√2
    let s = 1.0 + 2f64.sqrt();
    let xb = 1.0 - 1.0 / 2f64.sqrt();
    let uo = ScalarField::from_fn(grid.clone(), |x| {
        let x = x[0];
        if x <= xb {
            -0.5 * s * x * x
        } else {
            let (ub, db) = (-0.5 * s * xb * xb, -s * xb);
            ub + db * (x - xb) + 0.5 * s * (x - xb) * (x - xb)
        }
    });
    let fo = ScalarField::from_fn(grid.clone(), |x| x[0] - xb);
    write_field(&tmp.path().join("uo.csv"), &uo);
    write_field(&tmp.path().join("fo.csv"), &fo);
    let o = run(
        &["verify", "--config", g.to_str().unwrap(), "--u", "uo.csv", "--f", "fo.csv", "--out", "v"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("v").join("certification.json").exists());

    let c = write_config(tmp.path(), "cubic.json", 101, r#"{"kind": "interval", "ua": 0.0, "dua": 0.0, "ub": 1.0, "dub": 3.0}"#);
    let grid = std::sync::Arc::new(build_grid(1, &[0.0], &[1.0], &[101]).unwrap());
    write_field(&tmp.path().join("u3.csv"), &ScalarField::from_fn(grid.clone(), |x| x[0].powi(3)));
    write_field(&tmp.path().join("one.csv"), &ScalarField::from_fn(grid, |_| 1.0));
    let o = run(
        &["verify", "--config", c.to_str().unwrap(), "--u", "u3.csv", "--f", "one.csv", "--out", "w"],
        tmp.path(),
    );
    assert_eq!(code(&o), 4);
    let cert = json(&tmp.path().join("w").join("certification.json"));
    assert!(cert["sign_law_residual"].as_f64().unwrap() >= 1.0);
}

#[test]
fn dual_after_solve() {
    let tmp = TempDir::new().unwrap();
    let g = golden(tmp.path());
    let c = g.to_str().unwrap();
    run(&["solve", "--config", c, "--out", "s"], tmp.path());
    let o = run(&["dual", "--config", c, "--u", "s/u.csv", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&tmp.path().join("d").join("dual.json"));
    assert_eq!(rep["nodal_count"].as_u64(), Some(1));
    assert!(rep["mode"].is_string());
    assert!(tmp.path().join("d").join("f.csv").exists());
}

#[test]
fn oracle_prints_closed_form() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["oracle", "0", "1", "0", "0", "0", "1"], tmp.path());
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["s"].as_f64().unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-9);
    assert!((v["xbar"].as_f64().unwrap() - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-9);
    assert_eq!(v["smooth"], false);

    let o = run(&["oracle", "0", "1", "0", "-1", "0"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn convexity_of_pure_xi() {
    let tmp = TempDir::new().unwrap();
    let cfg = quadratic(tmp.path());
    let o = run(&["convexity", "--config", cfg.to_str().unwrap(), "--out", "c"], tmp.path());
    assert_eq!(code(&o), 0);
    let rep = json(&tmp.path().join("c").join("convexity.json"));
    assert_eq!(rep["p_bar"].as_f64(), Some(2.0));
}
