use fraclap_cli::scenarios::{list_scenarios, scenario_config};
use fraclap_cli::ExperimentConfig;
use serde_json::Value;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fraclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap")).args(args).output().expect("binary runs")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fraclap-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn block_names(dir: &std::path::Path) -> Vec<String> {
    json(dir.join("checks.json")).as_array().unwrap().iter().map(|b| b["name"].as_str().unwrap().to_string()).collect()
}

#[test]
fn list_prints_catalog() {
    let out = fraclap(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names.len(), 11);
    assert_eq!(names, list_scenarios());
}

#[test]
fn chain_verify_writes_artifacts() {
    let dir = scratch("chain");
    let out = fraclap(&["chain-verify", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(block_names(&dir), ["closed-forms", "k0-brackets", "half-space-ratio"]);
    let manifest = json(dir.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    let echo = ExperimentConfig::parse(manifest["config"].as_str().unwrap()).expect("echo re-parses");
    assert_eq!(echo.name(), "chain-verify");
    for a in manifest["artifacts"].as_array().unwrap() {
        let name = a.as_str().unwrap();
        let body = fs::read_to_string(dir.join(name)).unwrap();
        if name.ends_with(".csv") {
            assert!(body.starts_with("# columns: "), "{name}");
        }
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn halfspace_1d_reports_six_blocks() {
    let dir = scratch("hs1");
    let out = fraclap(&["run", "halfspace-bistable-1d", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        block_names(&dir),
        ["hypotheses", "upper-bound", "uniform-convergence", "monotonicity", "uniqueness", "boundary-decay"]
    );
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unattainable_threshold_exits_one() {
    let dir = scratch("fail");
    let mut cfg = scenario_config("halfspace-bistable-1d").unwrap().unwrap();
    cfg.set("checks", "list", "hypotheses, monotonicity").unwrap();
    cfg.set("checks", "monotone_threshold", "1.0").unwrap();
    cfg.set("run", "out", dir.join("out").to_str().unwrap()).unwrap();
    let path = dir.join("fail.cfg");
    fs::write(&path, cfg.to_ini()).unwrap();
    let out = fraclap(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed checks: monotonicity"));
    let checks = json(dir.join("out/checks.json"));
    assert_eq!(checks[1]["name"], "monotonicity");
    assert_eq!(checks[1]["status"], "fail");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_config_exits_two_with_all_errors() {
    let dir = scratch("bad");
    let path = dir.join("bad.cfg");
    fs::write(&path, "[scenario]\nname = bad\nkind = semilinear\n[operator]\ns = 1.5\nfoo = 1\n").unwrap();
    let out = fraclap(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("s must lie in (0,1)"), "{err}");
    assert!(err.contains("unknown key 'foo'"), "{err}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_scenario_exits_two() {
    let out = fraclap(&["run", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stencil_dump_lists_offsets() {
    let dir = scratch("stencil");
    let out = fraclap(&["operator-check", "halfspace-bistable-1d", "--dump-stencil", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = fs::read_to_string(dir.join("stencil.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("# columns: k1, weight"));
    assert_eq!(lines.next(), Some("k1,weight"));
    let weights: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(weights.len() >= 2 && weights.iter().all(|w| *w > 0.0));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("determinism");
    let mut bodies = Vec::new();
    for k in 0..2 {
        let out_dir = dir.join(k.to_string());
        let out = fraclap(&["run", "maxprin-random", "--seed", "11", "--threads", "2", "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        bodies.push(fs::read(out_dir.join("checks.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    fs::remove_dir_all(&dir).unwrap();
}
