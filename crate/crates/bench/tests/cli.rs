use std::fs;
use std::path::Path;
use std::process::Command;

use harmonize_bench::artifacts::Manifest;
use harmonize_bench::io::{read_json, sha256_hex};

fn harmonize(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_harmonize")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    harmonize(args).status.code().expect("exit code")
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["simulate", "--out", out]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["tune", "--scenario", "/nonexistent/scenario.toml", "--out", out]), 2);
    assert_eq!(code(&["stability", "--grid", "1:0.5", "--out", out]), 2);
    assert_eq!(code(&["stability", "--drive", "x9", "--out", out]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn bad_scenario_values_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    for text in ["[exciter]\nmass = 1.0\n", "[control]\nharmonics = [2, 12]\n", "[drive]\nkind = \"force\"\nlocation = \"x7\"\n"] {
        fs::write(&bad, text).unwrap();
        let out = dir.path().join("o");
        assert_eq!(code(&["tune", "--scenario", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2, "{text}");
        assert!(!out.exists());
    }
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.toml");
    fs::write(&scn, "[reference]\nmax_iterations = 1\nperiodicity_tolerance = 1e-14\n").unwrap();
    let out = dir.path().join("o");
    let args = ["reference", "--scenario", scn.to_str().unwrap(), "--grid", "1.0:1.1:0.1", "--out", out.to_str().unwrap()];
    let o = harmonize(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

fn check_manifest(dir: &Path) -> Manifest {
    let m: Manifest = read_json(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.status, "ok");
    for a in &m.artifacts {
        let bytes = fs::read(dir.join(&a.file)).unwrap();
        match &a.sha256 {
            Some(h) => assert_eq!(h, &sha256_hex(&bytes), "{}", a.file),
            None => assert!(a.volatile),
        }
    }
    m
}

#[test]
fn stability_writes_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stab");
    assert_eq!(code(&["stability", "--grid", "0.5:8:0.05", "--seed", "7", "--out", out.to_str().unwrap()]), 0);
    let m = check_manifest(&out);
    assert_eq!(m.seeds, vec![("noise".to_string(), 7)]);
    let files: Vec<&str> = m.artifacts.iter().map(|a| a.file.as_str()).collect();
    for f in ["scenario.toml", "grid.txt", "margin.csv", "verdicts.json"] {
        assert!(files.contains(&f), "{f}");
    }
    let margin = fs::read_to_string(out.join("margin.csv")).unwrap();
    assert!(margin.lines().next().unwrap().starts_with("location,"));
    // Only finished files remain: no temporaries from the atomic writes.
    assert_eq!(fs::read_dir(&out).unwrap().count(), files.len() + 1);
}
