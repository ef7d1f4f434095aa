//! End-to-end runs of the `oie` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oie_core::io::{read_grid, Table};

fn oie(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oie")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = oie(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(args: &[&str], out: &Path) -> i32 {
    oie(args, out).status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn predict_tabulated_grid_and_surface() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    ok(&["--seed", "1", "predict", "--table1"], &out);
    let grid = read_grid(&Table::read(&out.join("grid.csv")).unwrap(), "u_normalized").unwrap();
    assert!((grid[0][0] - 0.295578959).abs() < 1e-9);
    for i in 0..3 {
        for j in 0..2 {
            assert!(grid[i][j] <= grid[i][j + 1]);
            assert!(grid[j][i] >= grid[j + 1][i]);
        }
    }
    let surface = Table::read(&out.join("fig4_surface.csv")).unwrap();
    assert_eq!(surface.rows.len(), 900);
    let svg = std::fs::read_to_string(out.join("fig4_surface.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
    let m = manifest(&out);
    assert_eq!(m["command"], "predict");
    assert_eq!(m["seed"], 1);
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v == "grid.csv"));
}

#[test]
fn fit_recovers_synthetic_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("p");
    ok(&["predict", "--table1", "--mesh", "0"], &p);
    let f = tmp.path().join("f");
    let grid = p.join("grid.csv");
    let o = ok(&["--seed", "7", "fit", "--input", grid.to_str().unwrap()], &f);
    assert!(String::from_utf8_lossy(&o.stdout).contains("kkt residual"));
    let fit = Table::read(&f.join("fit.csv")).unwrap();
    let names = fit.column_str("parameter").unwrap();
    let values = fit.column_str("value").unwrap();
    let kkt: f64 = values[names.iter().position(|n| *n == "kkt_residual").unwrap()].parse().unwrap();
    assert!(kkt < 1e-8);
    let observed = read_grid(&Table::read(&grid).unwrap(), "u_normalized").unwrap();
    let predicted = read_grid(&Table::read(&f.join("predicted.csv")).unwrap(), "u_normalized").unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((observed[i][j] - predicted[i][j]).abs() < 1e-3);
        }
    }
}

#[test]
fn compare_figure_passes_values_through() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("p");
    ok(&["--seed", "3", "predict", "--table1", "--noise-sd", "0.02", "--mesh", "0"], &p);
    let errors = write(
        tmp.path(),
        "errors.csv",
        "visual_level,haptic_level,error_deg\nV0,H0,2.4\nV0,H1,2.5\nV0,H2,2.8\nV1,H0,2.6\nV1,H1,2.7\nV1,H2,3.1\nV2,H0,2.6\nV2,H1,2.8\nV2,H2,3.2\n",
    );
    let c = tmp.path().join("c");
    ok(&["--seed", "3", "compare", "--input", p.join("grid.csv").to_str().unwrap(), "--errors", errors.to_str().unwrap()], &c);
    let cells = Table::read(&c.join("comparison.csv")).unwrap();
    let fig = Table::read(&c.join("fig4_comparison.csv")).unwrap();
    assert_eq!(cells.column_str("u_oie").unwrap(), fig.column_str("oie").unwrap());
    assert_eq!(cells.column_str("u_tem").unwrap(), fig.column_str("tem").unwrap());
    let scores = Table::read(&c.join("scores.csv")).unwrap();
    assert_eq!(scores.column_str("model").unwrap(), ["OIE", "TEM"]);
}

#[test]
fn simulate_protocol_and_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s");
    ok(&["--seed", "5", "simulate", "--condition", "V1H2", "--u", "0.3"], &s);
    let trial = Table::read(&s.join("trial.csv")).unwrap();
    assert_eq!(trial.headers, ["t", "q_star", "q", "q_c", "tau_couple", "tau_pert", "emg_f", "emg_e"]);
    assert_eq!(trial.rows.len(), 2000);

    let p = tmp.path().join("p");
    ok(&["--seed", "5", "protocol", "--trials-per-block", "3", "--solo-trials", "2"], &p);
    let ds = Table::read(&p.join("dataset.csv")).unwrap();
    assert_eq!(ds.rows.len(), 2 + 9 * 3);
    let slopes = Table::read(&p.join("slopes.csv")).unwrap();
    assert_eq!(slopes.rows.len(), 18);
}

#[test]
fn emg_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cal = String::from("envelope,torque\n");
    for k in 0..50 {
        let e = k as f64 / 50.0;
        cal.push_str(&format!("{e},{}\n", 2.0 * e + 0.5));
    }
    let cal = write(tmp.path(), "cal.csv", &cal);
    let c = tmp.path().join("c");
    ok(&["emg", "--input", cal.to_str().unwrap(), "--calibrate"], &c);
    let t = Table::read(&c.join("calibration.csv")).unwrap();
    assert!((t.column_f64("alpha0").unwrap()[0] - 2.0).abs() < 1e-9);
    assert!((t.column_f64("alpha1").unwrap()[0] - 0.5).abs() < 1e-9);

    let mut raw = String::from("t,emg_f_raw,emg_e_raw\n");
    for k in 0..1000 {
        let t = k as f64 / 1000.0;
        raw.push_str(&format!("{t},{},{}\n", (std::f64::consts::TAU * 50.0 * t).sin(), 0.5 * (std::f64::consts::TAU * 80.0 * t).sin()));
    }
    let raw = write(tmp.path(), "raw.csv", &raw);
    let d = tmp.path().join("d");
    ok(&["emg", "--input", raw.to_str().unwrap(), "--decompose"], &d);
    let out = Table::read(&d.join("emg_out.csv")).unwrap();
    assert_eq!(out.headers, ["t", "env_f", "env_e", "tau", "u"]);
    assert_eq!(out.rows.len(), 1000);
    let sp = tmp.path().join("sp");
    ok(&["emg", "--input", raw.to_str().unwrap(), "--spectrum"], &sp);
    assert!(sp.join("spectrum_reciprocal.csv").exists());
}

#[test]
fn spectrum_of_target_has_two_peaks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    ok(&["spectrum", "--signal", "target"], &out);
    let peaks = Table::read(&out.join("peaks.csv")).unwrap().column_f64("freq_hz").unwrap();
    assert_eq!(peaks.len(), 2);
    assert!((peaks[0] - 0.149).abs() <= 0.05 && (peaks[1] - 0.497).abs() <= 0.05);
    assert!(manifest(&out)["seed"].is_u64(), "generated seed is recorded");
}

#[test]
fn figures_emit_svg_with_backing_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f");
    ok(&["--seed", "2", "figures", "--trials-per-block", "3", "--solo-trials", "1"], &out);
    let mut svgs = 0;
    for entry in std::fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "svg") {
            svgs += 1;
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(text.len() < 2 * 1024 * 1024);
            roxmltree::Document::parse(&text).unwrap();
            assert!(path.with_extension("csv").exists());
        }
    }
    assert_eq!(svgs, 6);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&["simulate", "--condition", "V9H9"], &out), 2);
    assert_eq!(code(&["bogus"], &out), 2);
    assert_eq!(code(&["emg", "--input", "x.csv"], &out), 2);

    let missing = tmp.path().join("missing.csv");
    assert_eq!(code(&["fit", "--input", missing.to_str().unwrap()], &out), 5);

    let bad_cols = write(tmp.path(), "bad.csv", "a,b\n1,2\n");
    assert_eq!(code(&["fit", "--input", bad_cols.to_str().unwrap()], &out), 3);
    let short = write(tmp.path(), "short.csv", "visual_level,haptic_level,u_normalized\nV0,H0,0.5\n");
    assert_eq!(code(&["fit", "--input", short.to_str().unwrap()], &out), 3);
    let range = write(
        tmp.path(),
        "range.csv",
        "visual_level,haptic_level,u_normalized\nV0,H0,1.5\nV0,H1,0\nV0,H2,0\nV1,H0,0\nV1,H1,0\nV1,H2,0\nV2,H0,0\nV2,H1,0\nV2,H2,0\n",
    );
    assert_eq!(code(&["fit", "--input", range.to_str().unwrap()], &out), 3);
    let zeros = write(
        tmp.path(),
        "zeros.csv",
        "visual_level,haptic_level,u_normalized\nV0,H0,0\nV0,H1,0\nV0,H2,0\nV1,H0,0\nV1,H1,0\nV1,H2,0\nV2,H0,0\nV2,H1,0\nV2,H2,0\n",
    );
    assert_eq!(code(&["fit", "--input", zeros.to_str().unwrap()], &out), 4);

    let cfg = write(tmp.path(), "bad.cfg", "plant.inertia = 0.005\nnot_a_key = 1\n");
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "simulate", "--condition", "V0H0"], &out), 3);
    let cfg = write(tmp.path(), "neg.cfg", "plant.inertia = -1\n");
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "simulate", "--condition", "V0H0"], &out), 4);
}

#[test]
fn config_changes_parameter_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.cfg", "# stiffer wrist\nplant.k1 = 3\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["--seed", "1", "--config", cfg.to_str().unwrap(), "simulate", "--condition", "V0H0"], &a);
    ok(&["--seed", "1", "simulate", "--condition", "V0H0"], &b);
    assert_ne!(manifest(&a)["parameter_hash"], manifest(&b)["parameter_hash"]);
    assert_ne!(std::fs::read(a.join("trial.csv")).unwrap(), std::fs::read(b.join("trial.csv")).unwrap());
}
