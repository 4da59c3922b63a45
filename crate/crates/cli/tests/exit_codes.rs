mod common;

use std::fs;

use common::run;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn non_binary_cell_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "1,0,1\n0,1,1\n1,2,0\n").unwrap();
    let out = run(dir.path(), &["reliability", "-i", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("bad.csv") && msg.contains("line 3") && msg.contains("column 2"), "{msg}");
}

#[test]
fn header_shifts_the_reported_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "a,b\n1,0\n1, \n").unwrap();
    let out = run(dir.path(), &["split", "-i", "bad.csv", "--header"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn ragged_rows_and_missing_files_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ragged.csv"), "1,0,1\n0,1\n").unwrap();
    assert_eq!(run(dir.path(), &["split", "-i", "ragged.csv"]).status.code(), Some(1));
    let out = run(dir.path(), &["split", "-i", "absent.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.csv"));
}

#[test]
fn constant_scores_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("flat.csv"), "1,0,1,0\n1,0,1,0\n1,0,1,0\n").unwrap();
    let out = run(dir.path(), &["reliability", "-i", "flat.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ZeroVariance"), "{}", stderr(&out));
}

#[test]
fn singular_covariance_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "1,2\n2,4\n").unwrap();
    let out = run(
        dir.path(),
        &["battery", "--covariance", "d.csv", "--reliabilities", "0.5,0.5", "--weights", "optimal"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SingularMatrix"), "{}", stderr(&out));
}

#[test]
fn asymmetric_covariance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "1,0.2\n0.3,1\n").unwrap();
    let out = run(dir.path(), &["battery", "--covariance", "d.csv", "--reliabilities", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("d.csv"));
}

#[test]
fn simulate_rejects_tiny_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--model", "D2", "--N", "1", "--n", "4", "--output", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
