use std::process::{Command, Output};

fn qhfocus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhfocus")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn analyze_first_order_focus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f31.txt");
    std::fs::write(&path, "p 2\nq 3\nx 5 0 1.0   # a50\ny 4 1 1.0   # b41\n").unwrap();
    let out = qhfocus(&["analyze", "--system", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["focus_order"], 1);
    assert_eq!(v["report"]["tol"], 1e-12);
}

#[test]
fn empty_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.txt");
    std::fs::write(&path, "").unwrap();
    let out = qhfocus(&["analyze", "--system", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn malformed_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "p 2\nq 3\nx 5 zero 1.0\n").unwrap();
    let out = qhfocus(&["analyze", "--system", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn verify_passes_every_row() {
    let out = qhfocus(&["verify", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["combination"]["reading_used"], "prefactors-once");
}

#[test]
fn surveys_are_deterministic() {
    let args = ["survey", "--p", "2", "--q", "3", "--samples", "8", "--seed", "3", "--format", "json"];
    let a = qhfocus(&args);
    let b = qhfocus(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a)["tol"].is_number());
}

#[test]
fn cycles_write_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let out = qhfocus(&[
        "cycles",
        "--family",
        "eq325",
        "--params",
        "eps1=7.0154375e-9,eps2=1.6158670e-4",
        "--h-min",
        "0.01",
        "--h-max",
        "0.4",
        "--csv",
        csv.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["cycle_set"]["cycles"].as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("h,delta\n"));
    assert_eq!(text.lines().count(), 49);
}

#[test]
fn unknown_family_parameter_is_an_input_error() {
    let out = qhfocus(&["jacobian", "--family", "eq325", "--params", "sigma=1", "--indices", "2,4"]);
    assert_eq!(out.status.code(), Some(1));
}
