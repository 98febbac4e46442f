use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdsim"))
        .args(args)
        .env_remove("KDSIM_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn figure_scan_csv() {
    let o = kdsim(&["--mode", "averaged", "--T", "10", "--epsilon", "10", "--calT", "0,1,10", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# columns = p_x,w_ideal,w_bar[calT=0],w_bar[calT=1],w_bar[calT=10]"));
    let rows = data_rows(&text);
    // ±(2·113 + 6) at step 0.01
    assert_eq!(rows.len(), 46401);
    assert!(rows.iter().all(|r| r.len() == 5 && r.iter().all(|x| x.is_finite())));
    let center = rows.iter().find(|r| r[0] == 0.0).unwrap();
    assert!((center[2] - 0.0041770).abs() < 1e-6);
    assert!(center[2] < center[3] && center[3] < center[4]);
}

#[test]
fn header_echoes_every_parameter() {
    let o = kdsim(&["--mode", "ideal", "--T", "3", "--p-min", "-1", "--p-max", "1"]);
    let text = stdout(&o);
    for key in [
        "kdsim_version", "preset", "mode", "T", "calT", "epsilon", "n-max", "p-min", "p-max", "step", "method",
        "mc-samples", "seed", "tol", "n", "m", "omega-tau", "t-max", "format", "n_max_used",
    ] {
        assert!(text.contains(&format!("# {key} = ")), "missing {key}");
    }
}

#[test]
fn gaussian_without_interaction() {
    let o = kdsim(&["--mode", "ideal", "--T", "0", "--epsilon", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r.len() == 2));
    let peak = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    assert!((peak - (10.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
}

#[test]
fn inm_table_triangle() {
    let o = kdsim(&[
        "--mode", "inm-table", "--n", "0..2", "--m", "0..2", "--T", "10", "--calT", "1", "--mc-samples", "1000000",
        "--seed", "7", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let cols: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let idx = |name: &str| cols.iter().position(|c| *c == name).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for r in rows {
        let v = |name: &str| r[idx(name)].as_f64().unwrap();
        assert!(v("abs_diff_quadrature_closed_form") < 1e-8);
        assert!(v("abs_diff_quadrature_monte_carlo") < 3.0 * v("monte_carlo_stderr"));
    }
}

#[test]
fn deterministic_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = kdsim(&[
            "--mode", "averaged", "--calT", "1", "--method", "monte-carlo", "--mc-samples", "20000", "--seed", "11",
            "--p-min", "-4", "--p-max", "4", "-o", path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn json_round_trip() {
    let csv = stdout(&kdsim(&["--mode", "ideal", "--T", "6", "--p-min", "-3", "--p-max", "3"]));
    let json = stdout(&kdsim(&["--mode", "ideal", "--T", "6", "--p-min", "-3", "--p-max", "3", "--format", "json"]));
    let doc: Value = serde_json::from_str(&json).unwrap();
    let from_json: Vec<Vec<f64>> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect();
    // 17 significant digits in CSV round-trip exactly as well
    assert_eq!(from_json, data_rows(&csv));
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, json);
    assert_eq!(doc["meta"]["mode"], "ideal");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# scan\nmode = ideal\nT = 4\nepsilon = 5\np-min = -1\np-max = 1\nformat = json\n").unwrap();
    let o = kdsim(&["--config", cfg.to_str().unwrap(), "--T", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["meta"]["T"], "2");
    assert_eq!(doc["meta"]["epsilon"], "5");

    fs::write(&cfg, "mode = ideal\nunknown = 1\n").unwrap();
    assert_eq!(kdsim(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(kdsim(&["--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kdsim"))
        .args(["--preset", "cold-beam-sec5", "--format", "json"])
        .env("KDSIM_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scenario.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["dominant_term"], "schrodinger_spread");
}

#[test]
fn exit_codes() {
    // configuration errors
    assert_eq!(kdsim(&["--calT", "10", "--method", "closed-form"]).status.code(), Some(2));
    assert_eq!(kdsim(&["--method", "monte-carlo", "--calT", "1"]).status.code(), Some(2));
    assert_eq!(kdsim(&["--mode", "scenario"]).status.code(), Some(2));
    assert_eq!(kdsim(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(kdsim(&["--preset", "nope"]).status.code(), Some(2));
    // unreachable integrator tolerance
    let o = kdsim(&["--mode", "inm-table", "--T", "10", "--calT", "1", "--tol", "1e-25"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("achieved"));
    // output path is a directory
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kdsim(&["--mode", "ideal", "-o", dir.path().to_str().unwrap()]).status.code(), Some(4));
    assert!(!Path::new(&dir.path().join("ideal.csv")).exists());
}

#[test]
fn unresolved_peaks_warn_but_succeed() {
    let o = kdsim(&["--mode", "ideal", "--epsilon", "0.5", "--p-min", "-1", "--p-max", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("peaks unresolved (requires epsilon > 1"));
    assert!(stdout(&o).contains("# warning = peaks unresolved"));
}

#[test]
fn kernel_demo_traces() {
    let o = kdsim(&["--mode", "kernel-demo", "--omega-tau", "0.1,2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 42);
    let row = &doc["rows"][21];
    // ωτ = 2 at t = 0: γ = ln 5 / 2 and the second-order rate is 2
    assert!((row[2].as_f64().unwrap() - 0.5 * 5f64.ln()).abs() < 1e-15);
    assert_eq!(row[4].as_f64().unwrap(), 2.0);
}
