use std::f64::consts::{E, PI};
use std::process::{Command, Output};

use nlell::{export_result, run_command, CommandRequest, OutputFormat, ReportBody, ReportDocument};

fn nlell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlell")).args(args).output().unwrap()
}

fn request(args: &[&str]) -> CommandRequest {
    CommandRequest::parse_from(std::iter::once("nlell").chain(args.iter().copied())).unwrap()
}

#[test]
fn exit_codes_follow_verdicts() {
    let out = nlell(&["certify-existence", "--example", "ex-3.1", "--grid", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["certificate"]["verdict"], "PASS");

    let out = nlell(&["certify-nonexistence", "--example", "ex-3.2", "--mode", "auto", "--grid", "32"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let margin = report["result"]["certificate"]["components"][1]["margin"].as_f64().unwrap();
    assert!((margin + 0.021).abs() < 1e-3, "{margin}");

    let out = nlell(&["solve", "--example", "ex-3.2", "--grid", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["results"][0]["nonzero"], false);
}

#[test]
fn non_convergence_exits_three() {
    let out = nlell(&["solve", "--example", "ex-3.1", "--grid", "16", "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn errors_are_single_line_records() {
    for args in [
        vec!["solve", "--example", "nope"],
        vec!["solve", "--example", "ex-3.1", "--damping", "1.5"],
        vec!["solve", "--input", "/nonexistent/problem.json"],
        vec!["solve"],
        vec!["solve", "--example", "ex-3.1", "--grid", "a,b"],
        vec!["solve", "--example", "ex-3.1", "--accel", "anderson:20"],
    ] {
        let out = nlell(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let record: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert!(record["error"]["kind"].is_string() && record["error"]["message"].is_string());
    }
}

#[test]
fn invalid_problem_document_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let doc = nlell_core::builtin::builtin_document("mean-field")
        .unwrap()
        .replace("\"eta\": 0", "\"eta\": -1");
    std::fs::write(&path, doc).unwrap();
    let out = nlell(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("components[0].eta") && err.contains("\"validation\""), "{err}");
}

#[test]
fn solve_csv_has_node_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let out = nlell(&[
        "solve",
        "--example",
        "ex-3.1",
        "--grid",
        "16",
        "--format",
        "csv",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,u1,u2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1 + 16 * 32);
    let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 4);
    assert_eq!(rows[5].split(',').nth(1).unwrap().trim_start_matches('-').split('e').next().unwrap().len(), 18);
}

#[test]
fn certificate_csv_lists_constants() {
    let (_, report) = run_command(&request(&["certify-existence", "--example", "ex-3.1", "--grid", "16"])).unwrap();
    let text = String::from_utf8(export_result(&report, OutputFormat::Csv).unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,component,value"));
    let m1 = lines.find(|l| l.starts_with("M,1,")).unwrap();
    let v: f64 = m1.rsplit(',').next().unwrap().parse().unwrap();
    assert!((v - E / PI).abs() < 1e-12);
}

#[test]
fn json_reports_round_trip_byte_identically() {
    for args in [
        vec!["certify-existence", "--example", "ex-3.1", "--grid", "16"],
        vec!["certify-nonexistence", "--example", "ex-3.2", "--grid", "16"],
        vec!["solve", "--example", "mean-field", "--grid", "8"],
        vec!["eigen", "--example", "ex-3.1", "--grid", "8"],
        vec!["lift", "--example", "ex-3.1", "--grid", "8"],
        vec!["validate", "--example", "ex-3.2", "--grid", "8"],
        vec!["example", "--example", "ex-3.2"],
    ] {
        let (_, report) = run_command(&request(&args)).unwrap();
        let text = String::from_utf8(export_result(&report, OutputFormat::Json).unwrap()).unwrap();
        let parsed: ReportDocument = serde_json::from_str(&text).unwrap();
        let again = String::from_utf8(export_result(&parsed, OutputFormat::Json).unwrap()).unwrap();
        assert!(again == text, "{args:?} does not round-trip");
    }
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let args = ["solve", "--example", "ex-3.2", "--grid", "16", "--starts", "mid,random:4", "--seed", "42"];
    let run = || {
        let (_, mut report) = run_command(&request(&args)).unwrap();
        report.provenance.wall_time_s = 0.0;
        export_result(&report, OutputFormat::Json).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn user_constants_mode_reads_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let tau = [1.0 / E, PI * PI / (2.0 * E * E)];
    let theta = [PI / 2.0 + 1.0, PI * PI / 4.0 + 1.0];
    std::fs::write(&path, serde_json::json!({"tau": tau, "theta": theta}).to_string()).unwrap();
    let mode = format!("constants:{}", path.display());
    let out = nlell(&["certify-nonexistence", "--example", "ex-3.2", "--grid", "32", "--mode", &mode]);
    assert_eq!(out.status.code(), Some(0));
    // too large constants turn the verdict into FAIL
    std::fs::write(&path, r#"{"tau": [10, 10], "theta": [10, 10]}"#).unwrap();
    let out = nlell(&["certify-nonexistence", "--example", "ex-3.2", "--grid", "16", "--mode", &mode]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["certificate"]["verdict"], "FAIL");
}

#[test]
fn eigen_report_has_disk_eigenvalue() {
    let (_, report) = run_command(&request(&["eigen", "--example", "ex-3.1"])).unwrap();
    let ReportBody::Eigen { components, .. } = report.result else {
        panic!("wrong report kind");
    };
    assert!((components[0].mu - 5.78319).abs() < 1e-2);
}

#[test]
fn example_document_reloads() {
    let out = nlell(&["example", "--example", "ex-3.1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let doc = report["result"]["document"].to_string();
    let spec = nlell_core::problem::load_problem(&doc).unwrap();
    assert_eq!(spec.n(), 2);
}

#[test]
fn rectangle_input_problem_solves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rect.json");
    std::fs::write(
        &path,
        r#"{
  "domain": {"type": "rectangle", "x": [0, 1], "y": [0, 0.5]},
  "resolution": [16, 8],
  "components": [{
    "operator": {"a11": "1", "a22": "1", "a0": "1"},
    "boundary": {"kind": "robin", "b": "1", "zeta": "1"},
    "f": "w*(1 + u1)",
    "w": {"expr": "inv(1 + INT(u1))", "monotone": "dec"},
    "h": {"expr": "EVAL(1,[0.5,0.25])", "monotone": "inc"},
    "lambda": 0.5, "eta": 0.1, "rho": 1
  }]
}"#,
    )
    .unwrap();
    let out = nlell(&["solve", "--input", path.to_str().unwrap(), "--accel", "anderson:3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["provenance"]["nodes"], 17 * 9);
    assert_eq!(report["result"]["results"][0]["converged"], true);
}
