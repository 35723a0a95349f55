//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_klooster"))
}

#[test]
fn help_works() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("classical"));
    assert!(text.contains("verify"));
}

#[test]
fn classical_value() {
    let out = bin()
        .args(["classical", "--m1", "1", "--n1", "1", "--p", "3", "--r", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["re"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert_eq!(v["value"]["coeffs"][0], "-1");
}

#[test]
fn klp_routes_agree() {
    let out = bin()
        .args([
            "klp", "--group", "so33", "--word", "ab", "--p", "3", "--r", "1", "--s", "2",
            "--m1", "1", "--m2", "2", "--n1", "1", "--n2", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["meta"]["agree"], true);
}

#[test]
fn enumerate_counts_and_dump() {
    let out = bin()
        .args([
            "enumerate", "--group", "so42", "--word", "a", "--p", "3", "--r", "2", "--dump",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    // Eight element records plus the summary line.
    assert_eq!(lines.len(), 9);
    let summary: serde_json::Value = serde_json::from_str(lines[8]).unwrap();
    assert_eq!(summary["elements"], 8);
}

#[test]
fn scan_csv_columns() {
    let out = bin()
        .args([
            "scan", "--group", "so33", "--word", "b", "--p", "3", "--r", "0,1", "--m1", "0,1",
            "--n1", "1", "--format", "csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("group,word,p,r,s,m1,m2,m3,n1,n2,n3,re,im,err,route,cp_count"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn usage_error_exits_2() {
    let out = bin().args(["classical", "--m1", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn s4_fast_metadata() {
    let out = bin()
        .args([
            "s4", "--m2", "1", "--m3", "0", "--n2", "1", "--n3", "1", "--p", "3", "--r", "4",
            "--fast",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["meta"]["route"].as_str().unwrap().contains("Fast"));
}
