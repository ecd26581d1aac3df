//! End-to-end runs of the `evapprox` binary: exit codes, reports, determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evapprox")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn certify_poisson_spikes_passes() {
    let o = run(&["certify", "--family", "poisson", "--suite", "spikes", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 7);
    let worst = v["report"]["worst"]["value"].as_f64().unwrap();
    assert!(worst <= 1.0, "worst {worst}");
    assert_eq!(v["report"]["verdict"], "pass");
}

#[test]
fn poisson_mle_counterexample_exits_two() {
    let o = run(&["counterexample", "--family", "poisson", "--lambda", "100"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["violation_demonstrated"], true);
    let e = v["expectations"][0]["estimate"].as_f64().unwrap();
    assert!((e - 25.1).abs() < 0.1, "E = {e}");
    assert!(stderr(&o).contains("25.05"));
}

#[test]
fn cauchy_conditions_pass_with_small_cell_constant() {
    let o = run(&["check-conditions", "--family", "cauchy"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let p2 = v["conditions"].as_array().unwrap().iter().find(|c| c["condition"] == "p2").expect("p2 reported");
    let c_prime = p2["estimated_constant"].as_f64().unwrap();
    assert!(c_prime <= 2f64.ln(), "c' = {c_prime}");
}

#[test]
fn unknown_family_is_a_config_error_listing_ids() {
    let o = run(&["certify", "--family", "gamma"]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    for id in ["binomial", "discrete_uniform", "poisson", "continuous_uniform", "normal_mean", "normal_variance", "cauchy"] {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn configuration_errors_exit_three() {
    let cases: &[&[&str]] = &[
        &["certify"],
        &["certify", "--family", "poisson", "--mode", "interpolated"],
        &["certify", "--family", "cauchy", "--mode", "interpolated", "--epsilon", "0.3"],
        &["certify", "--family", "poisson", "--factor", "0.5"],
        &["certify", "--family", "cauchy", "--method", "exact-sum"],
        &["counterexample", "--family", "cauchy", "--kind", "mle"],
        &["counterexample", "--family", "poisson", "--lambda", "-1"],
        &["certify", "--family", "binomial", "--n", "2"],
        &["certify", "--family", "poisson", "--config", "/nonexistent/run.json"],
        &["certify", "--bogus-flag"],
    ];
    for args in cases {
        let o = run(args);
        assert_eq!(code(&o), 3, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn malformed_config_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), r#"{"family": {"id": "poisson"}, "theta": []}"#);
    let o = run(&["certify", "--config", &path]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn factor_one_fails_certification() {
    let o = run(&["certify", "--family", "poisson", "--factor", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn spike_counterexample_for_normal_variance() {
    let o = run(&["counterexample", "--family", "normal_variance", "--n", "4"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["kind"], "spike");
    assert!(v["report"]["max_estimate"].as_f64().unwrap() > 1.0);
}

#[test]
fn csv_report_has_one_row_per_theta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["certify", "--family", "discrete_uniform", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,estimate,error_bound,method"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r.ends_with(",exact_sum")));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "family": { "id": "normal_mean", "params": { "n": 4 } },
            "theta_grid": { "kind": "linspace", "lo": -5, "hi": 5, "points": 41 },
            "plan": { "method": "monte_carlo", "samples": 20000, "seed": 3 }
        }"#,
    );
    for format in ["json", "csv"] {
        let mut outputs = Vec::new();
        for i in 0..2 {
            let out = dir.path().join(format!("r{i}.{format}"));
            let o = run(&["certify", "--config", &config, "--seed", "11", "--format", format, "--out", out.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            outputs.push(std::fs::read(&out).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{format}");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r0.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["rng_seed"], 11);
}

#[test]
fn seed_changes_monte_carlo_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"family": {"id": "poisson"}, "theta_grid": {"kind": "list", "values": [0.5, 3, 40]}}"#);
    let a = run(&["certify", "--config", &config, "--method", "monte-carlo", "--samples", "5000", "--seed", "1"]);
    let b = run(&["certify", "--config", &config, "--method", "monte-carlo", "--samples", "5000", "--seed", "2"]);
    assert_eq!(json(&a)["report"]["rng_seed"], 1);
    assert_ne!(json(&a)["report"]["expectations"], json(&b)["report"]["expectations"]);
}

#[test]
fn config_file_with_decimal_strings_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{
            "family": { "id": "normal_mean", "params": { "n": "4", "alpha": "1.0" } },
            "components": { "kind": "spike" },
            "theta_grid": { "kind": "linspace", "lo": "-3", "hi": "3", "points": "13" },
            "seed": "5"
        }"#,
    );
    let o = run(&["certify", "--config", &path]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["report"]["theta_grid"].as_array().unwrap().len(), 13);
    assert!(v["report"]["bundle"].as_str().unwrap().contains("n=4"));

    let o = run(&["certify", "--config", &path, "--n", "16", "--seed", "9"]);
    let v = json(&o);
    assert_eq!(v["seed"], 9);
    assert!(v["report"]["bundle"].as_str().unwrap().contains("n=16"));
}

#[test]
fn interpolated_cauchy_certifies_on_a_short_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{
            "family": { "id": "cauchy" },
            "mode": { "mode": "interpolated", "epsilon": "0.1" },
            "theta_grid": { "kind": "list", "values": [0, 0.25, "0.5", 3.1] }
        }"#,
    );
    let o = run(&["certify", "--config", &path]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["report"]["mode"]["epsilon"], 0.1);
    assert_eq!(v["report"]["factor_c"], 36.0);
}

#[test]
fn list_families_names_all_seven() {
    let o = run(&["list-families"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v.as_array().unwrap().len(), 7);
    assert_eq!(v[2]["net"], "squares");
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("certify"));
}
