use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use plateau_ns::experiment::{read_records, ExperimentSummary};
use plateau_ns::measures::catalog;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_plateau-ns"));
    c.env_remove("PLATEAU_NS_OUTPUT_DIR");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_args(out: &Path) -> Vec<String> {
    [
        "run",
        "--model",
        "ref5d",
        "--strategy",
        "split",
        "--n",
        "100",
        "--budget-mult",
        "40",
        "--seed",
        "7",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    ok(bin().args(run_args(&trace)).output().unwrap());
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,X_k,L_k,Z_partial,evals_used"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[3] - 0.2).abs() < 0.1, "first Z_partial {}", first[3]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(summary["strategy"], "split");
    assert_eq!(summary["budget"], 4000);
}

#[test]
fn run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/t.csv");
    let b = dir.path().join("b/t.csv");
    ok(bin().args(run_args(&a)).output().unwrap());
    ok(bin().args(run_args(&b)).output().unwrap());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(a.with_extension("json")).unwrap(),
        fs::read(b.with_extension("json")).unwrap()
    );
}

#[test]
fn run_defaults_to_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    ok(bin()
        .env("PLATEAU_NS_OUTPUT_DIR", dir.path())
        .args([
            "run",
            "--model",
            "linear",
            "--strategy",
            "vanilla",
            "--n",
            "20",
            "--budget-mult",
            "5",
            "--seed",
            "3",
        ])
        .output()
        .unwrap());
    assert!(dir.path().join("run_vanilla_n20_seed3.csv").exists());
    assert!(dir.path().join("run_vanilla_n20_seed3.json").exists());
}

#[test]
fn randomized_without_a_is_rejected() {
    let out = bin()
        .args([
            "run",
            "--strategy",
            "randomized",
            "--n",
            "10",
            "--budget-mult",
            "10",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--a"));
}

#[test]
fn seed_is_mandatory() {
    let out = bin()
        .args([
            "run",
            "--strategy",
            "vanilla",
            "--n",
            "10",
            "--budget-mult",
            "10",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn unknown_model_is_rejected() {
    let out = bin()
        .args([
            "run",
            "--model",
            "missing",
            "--strategy",
            "vanilla",
            "--n",
            "10",
            "--budget-mult",
            "10",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn diagnose_evidence_prints_reference_value() {
    let text = ok(bin()
        .args(["diagnose", "evidence-5d", "--quad-points", "10000"])
        .output()
        .unwrap());
    let z: f64 = text.trim().parse().unwrap();
    assert!((z - 1.002694).abs() < 5e-6);
}

#[test]
fn diagnose_pushforward_reports_json() {
    let text = ok(bin()
        .args([
            "diagnose",
            "pushforward",
            "--model",
            "cap",
            "--samples",
            "10000",
            "--seed",
            "1",
            "--against",
            "uniform",
        ])
        .output()
        .unwrap());
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["ks_distance"].as_f64().unwrap() > 0.4);
}

#[test]
fn experiment_writes_records_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.json");
    fs::write(
        &config,
        r#"{"model":"cap","n_values":[20],"a_values":[1e-3,1e-5],"budget_multipliers":[5,10],
            "replicates":2,"base_seed":5,"strategies":["randomized","split"],"remainder_term":true}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let serial_dir = dir.path().join("serial");
    ok(bin()
        .args(["experiment"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--traces")
        .output()
        .unwrap());
    ok(bin()
        .args(["experiment"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&serial_dir)
        .arg("--serial")
        .output()
        .unwrap());

    let records = read_records(fs::File::open(out_dir.join("records.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2 + 2 * 2);
    assert_eq!(
        fs::read_dir(out_dir.join("traces")).unwrap().count(),
        records.len()
    );
    assert_eq!(
        fs::read(out_dir.join("records.csv")).unwrap(),
        fs::read(serial_dir.join("records.csv")).unwrap()
    );

    let summary: ExperimentSummary =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(
        summary,
        ExperimentSummary::from_records("cap", summary.z_ref, &records)
    );
}

#[test]
fn experiment_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.json");
    fs::write(&config, r#"{"n_values":[20],"replicates":0}"#).unwrap();
    let out = bin()
        .args(["experiment"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

fn verify(name: &str) -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(format!("{name}.json"));
    fs::write(&path, catalog::by_name(name).unwrap().to_json()).unwrap();
    let out = bin().arg("verify").arg(&path).output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn verify_cap_is_case_b() {
    let (pass, text) = verify("cap");
    assert!(pass, "{text}");
    assert!(text.starts_with("case B\n"), "{text}");
    assert!(text.contains("int L dmu = 0.37"), "{text}");
}

#[test]
fn verify_constant_is_case_ab() {
    let (pass, text) = verify("constant");
    assert!(pass);
    assert!(text.starts_with("case AB\n"));
}

#[test]
fn verify_linear_is_case_zero() {
    let (pass, text) = verify("linear");
    assert!(pass);
    assert!(text.starts_with("case 0\n"));
    assert!(!text.contains("atom level"));
}

#[test]
fn verify_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{}").unwrap();
    let out = bin().arg("verify").arg(&path).output().unwrap();
    assert!(!out.status.success());
}
