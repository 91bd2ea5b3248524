//! End-to-end checks of the command-line contract: exit codes, report
//! schema, determinism, and tolerance overrides.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_triple-lab"))
}

fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is valid JSON")
}

#[test]
fn remark35_passes_with_expected_values() {
    let out = run(&["remark35"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["schema"], "triple-lab/1");
    assert_eq!(report["verdict"], "pass");
    let values = &report["values"];
    assert!((values["ttp_v"][0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((values["ttp_u"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let expected = (1.0 + 2.0 * 2.0_f64.sqrt()) / (3.0 * 2.0_f64.sqrt());
    assert!((values["gap_sq_v"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert!((values["gap_sq_vt"].as_f64().unwrap() - 1.05).abs() < 1e-9);
}

#[test]
fn verify_axioms_passes_on_spin_factor() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(&dir, "t4n3.json", r#"{"summands":[{"type":4,"n":3}]}"#);
    let out = run(&[
        "verify-axioms",
        "--factor-spec",
        spec.to_str().unwrap(),
        "--trials",
        "100",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "pass");
    assert!(report["axioms"]["jordan_max_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn preserver_check_flags_adjoint_ttp_failure() {
    let dir = tempfile::tempdir().unwrap();
    let factor = write_file(&dir, "m2.json", r#"{"summands":[{"type":1,"p":2,"q":2}]}"#);
    let map = write_file(
        &dir,
        "adjoint.json",
        r#"{"steps":[{"kind":"transpose"},{"kind":"entrywise_conjugate"}]}"#,
    );
    let out = run(&[
        "preserver-check",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        map.to_str().unwrap(),
        "--property",
        "ttp",
        "--trials",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "fail");
    let witnesses = report["reports"][0]["witnesses"].as_array().unwrap();
    assert!(!witnesses.is_empty());

    // The same map preserves distances.
    let out = run(&[
        "preserver-check",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        map.to_str().unwrap(),
        "--property",
        "isometry",
        "--trials",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_inputs_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(&dir, "bad.json", "{this is not json");
    let out = run(&["verify-axioms", "--factor-spec", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let missing = dir.path().join("nope.json");
    let out = run(&["verify-axioms", "--factor-spec", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Octonionic factor types are rejected.
    let t5 = write_file(&dir, "t5.json", r#"{"summands":[{"type":5,"n":3}]}"#);
    let out = run(&["verify-axioms", "--factor-spec", t5.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Shape violations in map specs are config errors too.
    let factor = write_file(&dir, "m2.json", r#"{"summands":[{"type":1,"p":2,"q":2}]}"#);
    let badmap = write_file(
        &dir,
        "badmap.json",
        r#"{"steps":[{"kind":"unitary_left","matrix":[[[1,0],[0,0],[0,0]]]}]}"#,
    );
    let out = run(&[
        "preserver-check",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        badmap.to_str().unwrap(),
        "--property",
        "ttp",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_seeds_give_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(
        &dir,
        "sum.json",
        r#"{"summands":[{"type":1,"p":2,"q":3},{"type":4,"n":3}]}"#,
    );
    let args = [
        "gap-vs-formula",
        "--factor-spec",
        spec.to_str().unwrap(),
        "--trials",
        "50",
        "--seed",
        "99",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let args = ["remark35"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn tolerance_env_override_is_used() {
    let out = bin()
        .env("TRIPLE_LAB_TOL", "1e-7")
        .args(["remark35"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    // remark35 does not embed tol, so drive a command that does.
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(&dir, "m2.json", r#"{"summands":[{"type":1,"p":2,"q":2}]}"#);
    let out = bin()
        .env("TRIPLE_LAB_TOL", "1e-7")
        .args(["verify-axioms", "--factor-spec", spec.to_str().unwrap(), "--trials", "10"])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["tol"].as_f64().unwrap(), 1e-7);
    // An explicit flag wins over the environment.
    let out = bin()
        .env("TRIPLE_LAB_TOL", "1e-7")
        .args([
            "verify-axioms",
            "--factor-spec",
            spec.to_str().unwrap(),
            "--trials",
            "10",
            "--tol",
            "1e-8",
        ])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["tol"].as_f64().unwrap(), 1e-8);
}

#[test]
fn ttp_table_emits_csv_and_relative_position_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_file(&dir, "t3.json", r#"{"summands":[{"type":3,"n":3}]}"#);
    let csv = dir.path().join("table.csv");
    let out = run(&[
        "ttp-table",
        "--factor-spec",
        spec.to_str().unwrap(),
        "--count",
        "5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().count() == 26); // header + 5x5
    assert!(text.starts_with("i,j,re,im"));

    let out = run(&[
        "relative-position",
        "--factor-spec",
        spec.to_str().unwrap(),
        "--trials",
        "60",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let kinds = report["kinds"].as_object().unwrap();
    assert!(kinds.contains_key("trangle"));
}

#[test]
fn socle_extend_distinguishes_complex_and_real_fits() {
    let dir = tempfile::tempdir().unwrap();
    let factor = write_file(&dir, "m2.json", r#"{"summands":[{"type":1,"p":2,"q":2}]}"#);
    let adjoint = write_file(
        &dir,
        "adjoint.json",
        r#"{"steps":[{"kind":"transpose"},{"kind":"entrywise_conjugate"}]}"#,
    );
    let out = run(&[
        "socle-extend",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        adjoint.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["complex_fit"]["status"], "inconsistent");
    assert_eq!(report["real_fit"]["status"], "consistent");

    let phase = write_file(
        &dir,
        "phase.json",
        r#"{"steps":[{"kind":"phase","value":[0.6,0.8]}]}"#,
    );
    let out = run(&[
        "socle-extend",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        phase.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["complex_fit"]["status"], "consistent");
}

#[test]
fn text_format_renders_flat_lines() {
    let out = run(&["remark35", "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict: \"pass\""));
    assert!(serde_json::from_str::<serde_json::Value>(&text).is_err());
}

#[test]
fn classify_property_reports_linearity_tags() {
    let dir = tempfile::tempdir().unwrap();
    let factor = write_file(&dir, "h2.json", r#"{"summands":[{"type":1,"p":1,"q":2}]}"#);
    let mixed = write_file(
        &dir,
        "mixed.json",
        r#"{"steps":[{"kind":"hilbert_mixed_conjugation","coords":[1],"summand":0}]}"#,
    );
    let out = run(&[
        "preserver-check",
        "--factor-spec",
        factor.to_str().unwrap(),
        "--map-spec",
        mixed.to_str().unwrap(),
        "--property",
        "classify",
        "--trials",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["linearity"][0], "hilbert-mixed");
}
