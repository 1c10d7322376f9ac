use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn topogen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topogen"))
        .args(args)
        .env("TOPOGEN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn norm_of_an_eighth() {
    let out = topogen(&["norm", "--x", "1/8", "--weights", "harmonic"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["value"], "1/3");
    assert_eq!(v["witness"], "{3:+1}");
}

#[test]
fn norm_accepts_negative_input_and_csv() {
    let out = topogen(&["norm", "--x", "-3/4", "--format", "csv", "--circle"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("position,digit,weight\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn zero_g0_is_a_usage_error() {
    let out = topogen(&["genpair", "--g0", "0", "--h0", "1/2", "--N", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(topogen(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(topogen(&["norm"]).status.code(), Some(2));
    assert_eq!(topogen(&["norm", "--x", "1/3"]).status.code(), Some(2));
    assert_eq!(
        topogen(&["escape", "--eps", "0", "--N", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(topogen(&["--help"]).status.code(), Some(0));
}

#[test]
fn genpair_certificate_and_targets() {
    let out = topogen(&[
        "genpair",
        "--g0",
        "3/2",
        "--h0",
        "1/2",
        "--N",
        "3",
        "--targets",
        "1/4,1/32",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["h"], "17/2^4");
    assert_eq!((v["u"].as_str(), v["v"].as_str()), (Some("5"), Some("-7")));
    assert_eq!(v["targets"][0]["u"], "20");
    assert_eq!(v["targets"][0]["v"], "-28");
    assert!(v["targets"][1]["u"].is_null());
}

#[test]
fn weight_violations_exit_one() {
    let out = topogen(&["weights-validate", "--weights", "geometric:1/3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["position"], 0);
    let ok = topogen(&["weights-validate", "--weights", "geometric:2/3"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn weight_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    std::fs::write(&path, "# head\n0,1\n1,3/4\n2,1/2\ntail,harmonic\n").unwrap();
    let out = topogen(&["norm", "--x", "1/4", "--weights", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["value"], "1/2");
}

#[test]
fn kronecker_verdicts() {
    let out = topogen(&[
        "kronecker",
        "--basis",
        "1",
        "--coords",
        "1/3",
        "--K",
        "100",
        "--format",
        "json",
    ]);
    let v = json_of(&out);
    assert_eq!(v["generator"], false);
    assert_eq!(v["coverage"][1]["radius"], "1/3");
    let out = topogen(&[
        "kronecker",
        "--basis",
        "1,sqrt2",
        "--coords",
        "0,1",
        "--format",
        "json",
    ]);
    let v = json_of(&out);
    assert_eq!(v["generator"], true);
    assert!(v["coverage"][2]["radius"].as_f64().unwrap() < 0.005);
}

#[test]
fn escape_witness_verifies() {
    let out = topogen(&[
        "escape", "--lambda", "harmonic", "--eps", "1/10", "--N", "20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["verified"], true);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 20);
}

#[test]
fn qna_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qna.json");
    let out = topogen(&[
        "qna-check",
        "--model",
        "du:12",
        "--eps",
        "1/4",
        "--k",
        "3",
        "--L",
        "8",
        "--trials",
        "100",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["trials"], 100);
}

#[test]
fn so3_cover_csv() {
    let out = topogen(&[
        "so3-cover",
        "--pair",
        "x:0.3,z:0.3",
        "--L",
        "4",
        "--net",
        "300",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "L,ball_size,covering_radius");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,1,"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &[
            "qna-check",
            "--model",
            "du:48",
            "--eps",
            "1/4",
            "--k",
            "3",
            "--L",
            "4",
            "--trials",
            "20",
            "--seed",
            "3",
        ],
        &[
            "so3-cover",
            "--pair",
            "x:0.3,z:0.3",
            "--L",
            "6",
            "--net",
            "500",
            "--seed",
            "9",
        ],
        &["escape", "--eps", "1/5", "--N", "50", "--format", "csv"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut hashes = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("run{i}-{rep}"));
            let mut full = args.to_vec();
            full.extend(["--out", path.to_str().unwrap()]);
            assert_eq!(topogen(&full).status.code(), Some(0));
            hashes.push(digest(&path));
        }
        assert_eq!(hashes[0], hashes[1], "{args:?}");
    }
}
