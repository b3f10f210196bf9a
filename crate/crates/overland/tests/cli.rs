//! Exit codes and outputs of the command-line tool.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_overland"));
    c.env("RUST_LOG", "warn").env_remove("OVERLAND_BLOCKS");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Copies the tiny scenario into `dir`, appending `extra` config lines.
fn tiny_scenario(dir: &Path, extra: &str) -> PathBuf {
    for f in ["dsm.asc", "riverbed.txt", "hydrograph.txt"] {
        std::fs::copy(data("tiny").join(f), dir.join(f)).unwrap();
    }
    let mut cfg = std::fs::read_to_string(data("tiny/scenario.cfg")).unwrap();
    for line in extra.lines() {
        let key = line.split('=').next().unwrap().trim();
        cfg = cfg
            .lines()
            .filter(|l| l.split('=').next().unwrap().trim() != key)
            .map(|l| format!("{l}\n"))
            .collect();
        cfg.push_str(line);
        cfg.push('\n');
    }
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

#[test]
fn help_succeeds_and_bad_usage_fails() {
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().args(["run", "--help"])), 0);
    assert_eq!(code(bin().arg("frobnicate")), 1);
    assert_eq!(code(bin().args(["validate", "--case", "ritter", "--n", "400", "--bogus"])), 1);
    assert_eq!(code(&mut bin()), 1);
}

#[test]
fn tiny_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_scenario(dir.path(), "");
    assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg).args(["--blocks", "2"])), 0);
    let out = dir.path().join("output");
    for f in ["max_h.asc", "max_speed.asc", "time_of_max_h.asc", "summary.json", "h_000180.asc", "u_000060.asc"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["mass_balance"]["closure"].as_f64().unwrap().abs() <= 1e-9, "{summary}");
}

#[test]
fn missing_dsm_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_scenario(dir.path(), "dsm = absent.asc");
    assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg)), 1);
    assert_eq!(code(bin().args(["run", "--config"]).arg(dir.path().join("nope.cfg"))), 1);
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_scenario(dir.path(), "colour = blue");
    assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg)), 1);
}

#[test]
fn blow_up_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_scenario(dir.path(), "cfl = 50\ninitial_h = 1");
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("step") && log.contains("row"), "{log}");
    assert!(dir.path().join("output/h_last_good.asc").exists());
}

#[test]
fn blocks_from_environment_lose_to_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_scenario(dir.path(), "");
    // an invalid environment value is ignored when the flag is given
    let mut c = bin();
    c.env("OVERLAND_BLOCKS", "lots").args(["run", "--config"]).arg(&cfg).args(["--blocks", "1"]);
    assert_eq!(code(&mut c), 0);
    let mut c = bin();
    c.env("OVERLAND_BLOCKS", "lots").args(["run", "--config"]).arg(&cfg);
    assert_eq!(code(&mut c), 1);
}

#[test]
fn validate_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("ritter.csv");
    assert_eq!(code(bin().args(["validate", "--case", "ritter", "--n", "100", "--report"]).arg(&report)), 0);
    let csv = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("case,n,"));
    assert!(lines[2].starts_with("ritter,100,"));
    assert_eq!(code(bin().args(["validate", "--case", "ritter", "--n", "4"])), 1);
}

#[test]
fn build_dsm_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dsm.asc");
    let status = code(
        bin()
            .arg("build-dsm")
            .arg("--dtm")
            .arg(data("flat_dtm.asc"))
            .arg("--features")
            .arg(data("golden_features.txt"))
            .arg("--classes")
            .arg(data("golden_classes.txt"))
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(status, 0);
    let built = overland::RasterGrid::read(&out).unwrap();
    let golden = overland::RasterGrid::read(data("golden_dsm.asc")).unwrap();
    assert_eq!(built, golden);
}
