//! End-to-end runs of the command-line binary: output formats and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_csmooth"));
    c.env_remove("CSMOOTH_THREADS").env("RUST_LOG", "error");
    c
}

fn geometry(name: &str) -> String {
    format!("{}/examples/{name}.cfg", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("csmooth-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn dim_table_and_csv() {
    let out = tmp("dim.csv");
    let o = run(&["dim", &geometry("two_patch"), "-p", "3", "-s", "1", "-L", "0..3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let totals: Vec<&str> = stdout.lines().skip(1).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(totals, vec!["23", "57", "173", "597"]);
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("level,h,patch,edge,vertex,total\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn dim_with_nullspace_strategy() {
    let o = run(&["dim", &geometry("three_patch_fan"), "-p", "7", "-s", "3", "-L", "2", "--strategy", "nullspace"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().nth(1).unwrap().split_whitespace().last(), Some("846"));
}

#[test]
fn check_passes_and_round_trips_the_dump() {
    let dump = tmp("basis.txt");
    let g = geometry("three_patch_fan");
    let o = run(&["check", &g, "-p", "5", "-s", "2", "-L", "2", "--fd", "--export", dump.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("check,edge,order,max_residual,worst_function\n"));
    assert!(csv.lines().any(|l| l.starts_with("fd,")));
    let o = run(&["check", &g, "-p", "5", "-s", "2", "-L", "2", "--basis", dump.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    // A corrupted coefficient breaks smoothness and is reported.
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines
        .iter()
        .position(|l| l.starts_with("part") && l.split_whitespace().nth(4).unwrap() != "1")
        .unwrap();
    let v: f64 = lines[idx + 1].split_whitespace().next().unwrap().parse().unwrap();
    let rest: Vec<&str> = lines[idx + 1].split_whitespace().skip(1).collect();
    lines[idx + 1] = format!("{:e} {}", v + 0.5, rest.join(" "));
    let bad = tmp("bad.txt");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let o = run(&["check", &g, "-p", "5", "-s", "2", "-L", "2", "--basis", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("FAIL jet edge"), "{err}");

    // An unreadable dump is a failed check as well.
    std::fs::write(&bad, "csmooth-basis 1\nparams x\n").unwrap();
    let o = run(&["check", &g, "-p", "5", "-s", "2", "-L", "2", "--basis", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_with_builtin_and_expression() {
    let g = geometry("two_patch");
    let o = run(&["fit", &g, "-p", "3", "-s", "1", "-L", "2..3", "-f", "trig"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let order: f64 = rows[1][3].parse().unwrap();
    assert!((3.3..4.8).contains(&order), "{order}");
    let o = run(&["fit", &g, "-p", "3", "-s", "1", "-L", "2", "-f", "1 + 2*x1 - x2^2"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let err: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(err < 1e-10);
}

#[test]
fn converge_writes_csv_file() {
    let out = tmp("conv.csv");
    let o = run(&["converge", &geometry("three_patch_fan"), "-p", "3", "-s", "1", "-L", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let ndof: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ndof, vec!["24", "66", "222", "822"]);
    let again = run(&["converge", &geometry("three_patch_fan"), "-p", "3", "-s", "1", "-L", "3"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv, "output is deterministic");
}

#[test]
fn level_above_maximum_is_rejected() {
    // Level 13 exceeds the supported range.
    let o = run(&["converge", &geometry("two_patch"), "-p", "3", "-s", "1", "-L", "13"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let g = geometry("two_patch");
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["dim", &g, "-p", "3", "-s", "2"]), Some(2));
    assert_eq!(code(&["dim", &g, "-p", "3", "-s", "1", "--strategy", "magic"]), Some(2));
    assert_eq!(code(&["dim", &g, "-p", "3"]), Some(2));
    assert_eq!(code(&["fit", &g, "-p", "3", "-s", "1", "-f", "nope("]), Some(2));
    assert_eq!(code(&["dim", "/nonexistent/geometry.cfg", "-p", "3", "-s", "1"]), Some(3));
    let broken = tmp("broken.cfg");
    std::fs::write(&broken, "[[patches]]\ncorners = [[0,0],[1,0],[1,1],[0,1]]\n").unwrap();
    assert_eq!(code(&["dim", broken.to_str().unwrap(), "-p", "3", "-s", "1"]), Some(3));
    assert_eq!(code(&["--threads", "2", "dim", &g, "-p", "3", "-s", "1", "-L", "1"]), Some(0));
    let o = bin().env("CSMOOTH_THREADS", "0").args(["dim", &g, "-p", "3", "-s", "1", "-L", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
