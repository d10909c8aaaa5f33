use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use claimlot::predict::synthetic;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn claimlot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_claimlot")).args(args).output().unwrap()
}

fn in_dir(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--out-dir", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    claimlot(&full)
}

#[test]
fn audit_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("outcomes_3col.csv");
    let out = in_dir(dir.path(), &["audit", input.to_str().unwrap(), "--group-by", "group"]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[1], "all,6,3,0.5");
    assert!(lines[2].starts_with("x,3,2,0.666"));
    assert!(lines[3].starts_with("y,3,1,0.333"));
}

#[test]
fn non_binary_audit_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,a,b\n1,1,2\n").unwrap();
    let out = in_dir(dir.path(), &["audit", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(in_dir(dir.path(), &["simulate", "--mechanism", "lottery"]).status.code(), Some(2));
    assert_eq!(in_dir(dir.path(), &["--threads", "0", "print-config"]).status.code(), Some(2));
    assert_eq!(in_dir(dir.path(), &["--config", "/no/such/file.toml", "print-config"]).status.code(), Some(2));
    // No schema: configuration problem.
    assert_eq!(in_dir(dir.path(), &["allocate", "--model", "lr"]).status.code(), Some(2));
    // Missing data file: runtime failure.
    let cfg = fixture("synthetic.toml");
    let out = in_dir(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "allocate", "--data", "/no/such/data.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = claimlot(&["--seed", "5", "print-config"]);
    assert!(out.status.success());
    let path = dir.path().join("c.toml");
    fs::write(&path, &out.stdout).unwrap();
    let again = claimlot(&["--config", path.to_str().unwrap(), "print-config"]);
    assert_eq!(out.stdout, again.stdout);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("seed = 5"));
}

#[test]
fn manifest_digests_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("simulate_minimal.toml");
    let out = in_dir(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 1);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.lines().count() > 1);
}

#[test]
fn fixture_matches_the_generator() {
    let mut buf = Vec::new();
    synthetic::write_csv(
        &synthetic::generate(synthetic::SYNTHETIC_ROWS, synthetic::SYNTHETIC_SEED),
        &mut buf,
    )
    .unwrap();
    assert_eq!(fs::read(fixture("synthetic_5k.csv")).unwrap(), buf);
}

#[test]
fn partial_flags_add_a_mechanism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("simulate_minimal.toml");
    let out = in_dir(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "simulate", "--kprime-rate", "0.5", "--nprime-rate", "0.3"],
    );
    assert!(out.status.success());
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.contains("partial_bf"));
}
