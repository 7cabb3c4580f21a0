use std::path::Path;
use std::process::{Command, Output};

use spectral_factors::synth::{generate, SyntheticConfig};

fn sdfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdfactor"))
        .args(args)
        .env("SDFACTOR_THREADS", "1")
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert_eq!(out.status.code(), Some(2));
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

/// Writes a dates-by-series price CSV built from a synthetic return panel.
fn write_prices(path: &Path, n: usize, t: usize, p: usize, seed: u64) {
    let panel = generate(&SyntheticConfig::new(n, t, p, 0.25).with_seed(seed)).unwrap().panel;
    let v = panel.values();
    let mut s = String::from("date");
    for i in 0..n {
        s.push_str(&format!(",s{i}"));
    }
    s.push('\n');
    let mut price = vec![100.0f64; n];
    for k in 0..=t {
        s.push_str(&format!("d{k}"));
        for (i, pr) in price.iter_mut().enumerate() {
            if k > 0 {
                *pr *= 1.0 + 0.01 * v[(i, k - 1)];
            }
            s.push_str(&format!(",{pr:.10}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn estimate_prices_to_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("prices.csv");
    write_prices(&csv, 60, 200, 3, 1);
    let out = sdfactor(&["estimate", "-i", csv.to_str().unwrap(), "--p-max", "8", "--b-step", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["p_hat"], 3);
    assert!(v["b_hat"].as_f64().unwrap() <= 0.2);
}

#[test]
fn missing_input_reports_io_error() {
    let v = error_json(&sdfactor(&["estimate", "-i", "/nonexistent/prices.csv"]));
    assert_eq!(v["error"], "io");
    assert!(v["message"].as_str().unwrap().contains("/nonexistent/prices.csv"));
}

#[test]
fn bad_cell_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, "date,a,b\nd1,0.1,0.2\nd2,oops,0.1\nd3,0.3,0.1\n").unwrap();
    let v = error_json(&sdfactor(&["estimate", "-i", csv.to_str().unwrap(), "--input-kind", "return"]));
    assert_eq!(v["error"], "parse");
    let msg = v["message"].as_str().unwrap();
    assert!(msg.contains("row 2") && msg.contains("column 1"), "{msg}");
}

#[test]
fn usage_errors_are_json() {
    let v = error_json(&sdfactor(&["estimate", "--bogus"]));
    assert_eq!(v["error"], "usage");
    let v = error_json(&sdfactor(&["mc", "--replications", "1", "--methods", "XYZ"]));
    assert!(v["message"].as_str().unwrap().contains("XYZ"));
}

#[test]
fn invalid_parameters_are_rejected() {
    let v = error_json(&sdfactor(&["meanfield", "--candidates", "1.5"]));
    assert_eq!(v["error"], "invalid_parameter");
}

#[test]
fn monte_carlo_reruns_are_byte_identical() {
    let args = [
        "mc", "--n", "60", "--p", "2", "--inv-snr", "0.25", "--replications", "3", "--seed", "5", "--p-max", "6",
        "--b-step", "0.1", "--format", "csv",
    ];
    let a = sdfactor(&args);
    let b = sdfactor(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("config,method,"));
}

#[test]
fn rolling_and_density_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("prices.csv");
    write_prices(&csv, 40, 160, 2, 2);
    let path = csv.to_str().unwrap();
    let out = sdfactor(&["roll", "-i", path, "--window", "100", "--step", "20", "--p-max", "6", "--b-step", "0.1", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().nth(1).unwrap().starts_with("0,d100,"));

    let dens = dir.path().join("d.csv");
    let out = sdfactor(&["density", "-i", path, "--p", "2", "--b", "0.1", "--bins", "30", "-o", dens.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let [real, model, mp] = spectral_factors::io::import_densities(&dens).unwrap();
    assert_eq!(real.bins(), 30);
    assert!((model.total() - 1.0).abs() < 1e-9 && (mp.total() - 1.0).abs() < 1e-9);
}

#[test]
fn meanfield_and_weak_run() {
    let out = sdfactor(&["meanfield", "--n", "60", "--t", "120", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    let out = sdfactor(&[
        "weak", "--n", "60", "--replications", "2", "--sigma", "0.5", "--weak-counts", "3", "--p-max", "6", "--b-step", "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.to_string().contains("BIC3"));
}
