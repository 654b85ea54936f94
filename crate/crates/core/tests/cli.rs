use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn cuspidal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuspidal")).args(args).output().expect("spawn")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cuspidal-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn constants_runs_and_repeats_byte_for_byte() {
    let a = cuspidal(&["constants", "--digits", "20"]);
    let b = cuspidal(&["constants", "--digits", "20"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["constants"].as_array().unwrap().len(), 8);
}

#[test]
fn classify_and_h_series_of_the_default_model() {
    let c = json(&cuspidal(&["classify"]));
    assert_eq!(c["kind"], "NilpotentSaddleOrder2");
    let h = json(&cuspidal(&["h-series", "--order", "8"]));
    assert_eq!(h["hj"][6], "-1");
}

#[test]
fn solve_and_rank() {
    let s = json(&cuspidal(&["lienard", "solve", "--case", "1"]));
    assert_eq!(s["relations"]["a8"]["a12"], "40/51");
    let r = cuspidal(&["lienard", "rank", "--case", "3"]);
    assert_eq!(json(&r)["rank"], 9);
}

#[test]
fn empty_a_vector_gives_zero_coefficients() {
    let p = scratch("empty.json", r#"{"a": []}"#);
    let o = cuspidal(&["lienard", "coeffs", "--a", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let coeffs = v["coefficients"].as_object().unwrap();
    assert!(!coeffs.is_empty());
    assert!(coeffs.values().all(|c| c["value"] == "0"));
}

#[test]
fn trace_writes_csv() {
    let o = cuspidal(&["trace", "--h", "-1e-3", "--nodes", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,weight,wx,wy"));
    assert!(lines.count() >= 16);
}

#[test]
fn sample_then_fit_through_files() {
    let a = scratch("a.json", r#"{"a": ["1", "0", "-1/3"]}"#);
    let o = cuspidal(&["melnikov-sample", "--a", a.to_str().unwrap(), "--h-grid", "geometric:1e-7,1e-3,30"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = scratch("m.csv", std::str::from_utf8(&o.stdout).unwrap());
    let f = cuspidal(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(f.status.code(), Some(0), "{}", String::from_utf8_lossy(&f.stderr));
    assert_eq!(json(&f)["coefficients"].as_array().unwrap().len(), 10);
}

#[test]
fn schema_errors_exit_2() {
    for args in [
        &["lienard", "solve", "--case", "4"][..],
        &["constants", "--digits", "3"],
        &["cycles", "count", "--sub-branch", "z"],
        &["no-such-command"],
    ] {
        let o = cuspidal(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = cuspidal(&["lienard", "solve", "--case", "4"]);
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "schema");
}

#[test]
fn numeric_errors_exit_3() {
    // y^2/2 - x^6 has no homoclinic loop
    let m = scratch("open.json", r#"{"hij": [{"i": 6, "j": 0, "c": "-1"}], "degree_bound": 14}"#);
    let o = cuspidal(&["trace", "--model", m.to_str().unwrap(), "--h", "-1e-3"]);
    assert_eq!(o.status.code(), Some(3));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "numeric");
}

#[test]
fn help_exits_0() {
    assert_eq!(cuspidal(&["--help"]).status.code(), Some(0));
}
