//! End-to-end checks of the binary: exit codes, output formats, and
//! report determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mp2s(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mp2s"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

#[test]
fn simulate_accepts_disjoint_instance() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.txt", "a1 a2 b3 b4\n");
    write(dir.path(), "t.txt", "a4 a3 b2 b1\n");
    let out = mp2s(
        &["simulate", "--automaton", "builtin:sqrt:4", "--s", "s.txt", "--t", "t.txt", "--trace", "out.jsonl"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "accepted");
    let trace = fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    let first = trace.lines().next().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(first).unwrap();
    for key in ["step", "state", "pos", "sym", "adv"] {
        assert!(parsed.get(key).is_some(), "trace line missing {key}");
    }
}

#[test]
fn simulate_rejects_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.txt", "a1 b2\n");
    write(dir.path(), "t.txt", "a1 b2\n");
    let out = mp2s(&["simulate", "--automaton", "builtin:trivial:2", "--s", "s.txt", "--t", "t.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "rejected");
}

#[test]
fn oracle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.txt", "a1\n");
    write(dir.path(), "t.txt", "b1\n");
    let out = mp2s(&["oracle", "--s", "s.txt", "--t", "t.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "disjoint");

    write(dir.path(), "t.txt", "a1\n");
    let out = mp2s(&["oracle", "--s", "s.txt", "--t", "t.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "not disjoint");
}

#[test]
fn gen_instance_writes_expected_streams() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(
        &["gen-instance", "--n", "4", "--i1", "1100", "--i2", "3,4", "--layout", "reversed",
          "--out-s", "s.txt", "--out-t", "t.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(fs::read_to_string(dir.path().join("s.txt")).unwrap().trim(), "a1 a2 b3 b4");
    assert_eq!(fs::read_to_string(dir.path().join("t.txt")).unwrap().trim(), "a4 a3 b2 b1");
}

#[test]
fn fool_reports_witness_with_exit_one_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["fool", "--automaton", "builtin:crippled:4:1100", "--n", "4",
        "--layout", "reversed", "--enum", "exhaustive", "--out", "report.json"];
    let out = mp2s(&args, dir.path());
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("witness found"));
    let report1 = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&report1).unwrap();
    assert!(parsed["witness"]["accepted"].as_bool().unwrap());
    assert!(!parsed["witness"]["oracle"].as_bool().unwrap());
    assert!(parsed["witness"]["spliceReport"]["exitConfigsEqual"].as_bool().unwrap());

    let out = mp2s(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report2 = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(report1, report2, "reruns must produce byte-identical reports");
}

#[test]
fn fool_on_correct_machine_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(
        &["fool", "--automaton", "builtin:sqrt:4", "--n", "4", "--layout", "reversed", "--enum", "exhaustive",
          "--out", "report.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("no witness"));
}

#[test]
fn bounds_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(
        &["bounds", "--mode", "forward", "--n", "1024", "--kf", "1", "--log2m", "200", "--out", "b.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ruledOut=true margin≈139.99");
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(parsed["ruledOut"], serde_json::Value::Bool(true));
}

#[test]
fn exhaustive_sweep_flags_bad_machine() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(
        &["exhaustive", "--automaton", "builtin:trivial:2", "--n", "2", "--space", "streams"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let out = mp2s(
        &["exhaustive", "--automaton", "builtin:crippled:4:1100", "--n", "4", "--space", "instances"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "the starved machine must be flagged");
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(&["simulate", "--automaton", "builtin:nope:4", "--s", "x", "--t", "y"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = mp2s(&["simulate"], dir.path()); // missing required flags
    assert_eq!(out.status.code(), Some(2));

    write(dir.path(), "s.txt", "a1\n");
    let out = mp2s(
        &["simulate", "--automaton", "builtin:sqrt:4", "--s", "s.txt", "--t", "missing.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stalling_machine_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // one-state machine over D_1 that never advances any head
    let mut table = String::from("mp2s n=1 m=1 kf=1 kb=0\nstate q0 start accept\n");
    for s in ["a1", "b1", "end"] {
        for t in ["a1", "b1", "end"] {
            table.push_str(&format!("trans q0 {s},{t} -> q0 SS\n"));
        }
    }
    write(dir.path(), "loop.mp2s", &table);
    write(dir.path(), "s.txt", "a1\n");
    write(dir.path(), "t.txt", "b1\n");
    let out = mp2s(
        &["simulate", "--automaton", "file:loop.mp2s", "--s", "s.txt", "--t", "t.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("stall"));
}

#[test]
fn remarks_default_samples_hold() {
    let dir = tempfile::tempdir().unwrap();
    let out = mp2s(&["remarks"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ruledOut=true"));
}
