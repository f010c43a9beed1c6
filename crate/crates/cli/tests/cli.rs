use std::process::Command;

fn gentledp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gentledp"))
}

#[test]
fn list_prints_every_experiment() {
    let out = gentledp().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["lsigma-dp", "qpmw", "compose-fail", "bounds-table"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
}

#[test]
fn passing_run_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rr.json");
    let out = gentledp()
        .args([
            "run", "--name", "rr", "--beta", "0.25", "--trials", "20", "--seed", "9", "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["config"]["params"]["beta"], 0.25);
    assert_eq!(report["config"]["seed"], 9);
    assert!(out_path.with_extension("csv").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"name": "compose-fail", "params": {"eps": 0.3, "n": 4096}, "seed": 1, "trials": 50}"#,
    )
    .unwrap();
    let out = gentledp()
        .args(["run", "--json", "--eps", "0.05", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["params"]["eps"], 0.05);
    assert_eq!(report["config"]["params"]["n"], 4096);
    assert_eq!(report["trials"].as_array().unwrap().len(), 50);
}

#[test]
fn failing_bounds_exit_one() {
    // With n = 16 the small-eps branch applies, but eps = 0.45 flips so many
    // bits that the estimate lands far above the noise floor.
    let out = gentledp()
        .args([
            "run",
            "--name",
            "compose-fail",
            "--eps",
            "0.45",
            "--n",
            "16",
            "--trials",
            "200",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}

#[test]
fn bad_input_exits_two() {
    let out = gentledp()
        .args(["run", "--name", "no-such-experiment"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = gentledp()
        .args(["run", "--name", "rr"])
        .env("GENTLEDP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        let out = gentledp()
            .args(["run", "--name", "lsigma-gentle", "--trials", "40", "--json"])
            .env("GENTLEDP_THREADS", threads)
            .output()
            .unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["wall_clock_secs"] = 0.into();
        v
    };
    assert_eq!(run("1"), run("4"));
}
