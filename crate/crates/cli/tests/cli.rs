use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlinucb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlinucb"))
        .args(args)
        .env("DLINUCB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, env: &str) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(r#"{{"env": {env}, "agents": [{{"name": "dlinucb"}}, {{"name": "linucb"}}], "n_seeds": 2}}"#),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"horizon": 1700, "K": 200}"#);
    let out = dir.path().join("run");
    let res = dlinucb(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("dlinucb") && stdout.contains("linucb"));
    for f in [
        "trace_seed0.csv",
        "trace_seed1.csv",
        "env_seed0.json",
        "summary.json",
        "detection.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let res = dlinucb(&["report", "--out", out.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("seeds: 2"));
    assert!(stdout.contains("latencies"));
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"horizon": 300, "d": 3, "K": 50, "delta": 0.3}"#,
    );
    let out = dir.path().join("run");
    let res = dlinucb(&[
        "simulate",
        "--config",
        &cfg,
        "--seeds",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert!(out.join("trace_seed2.csv").exists());
    assert!(!out.join("trace_seed3.csv").exists());
}

#[test]
fn infeasible_delta_fails_with_budget_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"horizon": 900, "delta": 5.0}"#);
    let res = dlinucb(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("rejection budget"), "{err}");
}

#[test]
fn gen_log_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("synthetic.csv");
    let res = dlinucb(&["gen-log", "--rows", "2000", "--out", log.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let res = dlinucb(&[
        "replay",
        "--log",
        log.to_str().unwrap(),
        "--agent",
        "linucb",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("ctr="), "{stdout}");
    assert!(stdout.contains("matched=") && stdout.contains("rows=2000"));
}

#[test]
fn replay_rejects_unknown_agent_and_bad_log() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n1,2\n").unwrap();
    assert!(!dlinucb(&["replay", "--log", bad.to_str().unwrap()])
        .status
        .success());
    let log = dir.path().join("ok.csv");
    assert!(
        dlinucb(&["gen-log", "--rows", "10", "--out", log.to_str().unwrap()])
            .status
            .success()
    );
    let res = dlinucb(&["replay", "--log", log.to_str().unwrap(), "--agent", "nope"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown agent"));
}

#[test]
fn shipped_default_config_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    let text = fs::read_to_string(path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["env"]["K"], 1000);
    assert_eq!(v["n_seeds"], 10);
}
