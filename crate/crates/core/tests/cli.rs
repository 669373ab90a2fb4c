//! End-to-end runs of the command-line front end into temporary directories.

use std::fs;
use std::path::Path;

use clap::Parser;
use resetlab::cli::{exit_code, run, Cli};

fn invoke(out: &Path, args: &[&str]) -> resetlab::Result<()> {
    let mut argv = vec!["resetlab", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(&Cli::try_parse_from(argv).unwrap())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    invoke(dir.path(), &["spectrum", "--coupler", "C0", "--sector", "1", "--range", "4.9:5.4:51"]).unwrap();
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("f_c_ghz,"));
    assert_eq!(lines.count(), 51);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "spectrum");
    assert!(manifest["artifacts"].as_array().unwrap().iter().any(|a| a.as_str().unwrap().ends_with("spectrum.csv")));
}

#[test]
fn evolve_trace_keeps_norm() {
    let dir = tempfile::tempdir().unwrap();
    invoke(
        dir.path(),
        &["--scenario", "chevron_qc", "evolve", "--init", "Q0=1", "--record-ps", "500"],
    )
    .unwrap();
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "t_ns");
    assert_eq!(*header.last().unwrap(), "norm");
    for line in csv.lines().skip(1) {
        let norm: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((norm - 1.0).abs() < 1e-10);
    }
}

#[test]
fn protocol_report_and_rerun_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        invoke(d.path(), &["--scenario", "chevron_qc", "protocol"]).unwrap();
    }
    for f in ["report.json", "report.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let report = json(&a.path().join("report.json"));
    let eps = report["summary"]["ancilla_error_1"].as_f64().unwrap();
    // a 5.32 ns hard swap at resonance empties the qubit
    assert!(eps < 1e-3, "{eps}");
}

#[test]
fn sweep_with_cut_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    invoke(
        dir.path(),
        &[
            "--scenario",
            "chevron_qc",
            "--step-ps",
            "5",
            "sweep",
            "--x",
            "0.duration:1:20:21",
            "--y",
            "0.amplitude:-1.3:-1.1:3",
            "--cut",
            "y=-1.2",
        ],
    )
    .unwrap();
    let side = json(&dir.path().join("grid.json"));
    assert_eq!(side["objective"], "mean");
    assert_eq!(side["scenario_sha256"].as_str().unwrap().len(), 64);
    let rows = fs::read_to_string(dir.path().join("grid.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 3);
    let cut = json(&dir.path().join("cut.json"));
    let period = cut["fitted_period"].as_f64().unwrap();
    assert!((period - 1.0 / (2.0 * 0.047)).abs() / period < 0.05, "{period}");
}

#[test]
fn optimize_is_seed_deterministic() {
    let args = [
        "--scenario",
        "qc_adiabatic_benchmark",
        "--seed",
        "11",
        "--step-ps",
        "5",
        "optimize",
        "--param",
        "0.g:0.005:0.2",
        "--param",
        "0.f_tau:-1.0:-0.05",
        "--objective",
        "ancilla1",
        "--max-evals",
        "60",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    invoke(a.path(), &args).unwrap();
    invoke(b.path(), &args).unwrap();
    for f in ["history.jsonl", "best_scenario.json", "optimize.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let best = json(&a.path().join("optimize.json"));
    assert!(best["best_value"].as_f64().unwrap() <= best["initial_value"].as_f64().unwrap());
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_init = invoke(dir.path(), &["--scenario", "chevron_qc", "evolve", "--init", "Q0=5"]);
    assert_eq!(exit_code(&bad_init), 1);
    let missing = invoke(dir.path(), &["--scenario", "/nonexistent/scenario.json", "protocol"]);
    assert_eq!(exit_code(&missing), 2);
    let bad_range = invoke(dir.path(), &["spectrum", "--range", "6:4:0"]);
    assert_eq!(exit_code(&bad_range), 1);
    assert_eq!(exit_code(&Ok(())), 0);
    assert!(Cli::try_parse_from(["resetlab", "frobnicate"]).is_err());
}
