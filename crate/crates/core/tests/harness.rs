use gentledp::harness::{Check, Relation};
use gentledp::{list_experiments, run_experiment, Error, ExperimentConfig, ExperimentReport};

fn without_clock(r: &ExperimentReport) -> String {
    let mut r = r.clone();
    r.wall_clock_secs = 0.0;
    r.to_json().unwrap()
}

#[test]
fn registry_names_are_unique_and_runnable() {
    let infos = list_experiments();
    let mut names: Vec<&str> = infos.iter().map(|i| i.name).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), infos.len());
    for info in &infos {
        if info.name.starts_with("qpmw") {
            continue;
        }
        let r = run_experiment(&ExperimentConfig::new(info.name).with_trials(3)).unwrap();
        assert!(!r.checks.is_empty(), "{} declares no checks", info.name);
    }
}

#[test]
fn same_seed_gives_identical_reports() {
    for name in [
        "lsigma-gentle",
        "compose-fail",
        "damage-lemma",
        "mmw-mistakes",
    ] {
        let cfg = ExperimentConfig::new(name).with_seed(17).with_trials(8);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            without_clock(&a),
            without_clock(&b),
            "{name} is not reproducible"
        );
    }
}

#[test]
fn qpmw_reports_are_reproducible() {
    let cfg = ExperimentConfig::new("qpmw")
        .with_param("n", 6u64)
        .with_param("m", 30u64)
        .with_trials(3)
        .with_seed(4);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(without_clock(&a), without_clock(&b));
}

#[test]
fn pass_flags_follow_the_declared_relation() {
    let r = run_experiment(&ExperimentConfig::new("rr").with_trials(20)).unwrap();
    for c in &r.checks {
        let expected = match c.relation {
            Relation::AtMost => c.value <= c.bound,
            Relation::AtLeast => c.value >= c.bound,
            Relation::Above => c.value > c.bound,
        };
        assert_eq!(c.pass, expected, "{}", c.name);
    }
    assert_eq!(r.passed, r.checks.iter().all(|c| c.pass));
    assert!(!Check::above("x", 1.0, 1.0).pass);
    assert!(Check::at_least("x", 1.0, 1.0).pass);
}

#[test]
fn unknown_names_and_zero_trials_are_rejected() {
    assert!(matches!(
        run_experiment(&ExperimentConfig::new("nope")),
        Err(Error::UnknownExperiment(_))
    ));
    assert!(run_experiment(&ExperimentConfig::new("rr").with_trials(0)).is_err());
    assert!(run_experiment(&ExperimentConfig::new("rr").with_param("beta", "wide")).is_err());
}

#[test]
fn config_round_trips_and_reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out/rr.json");
    let json = format!(
        r#"{{"name": "rr", "params": {{"beta": 0.2}}, "seed": 3, "trials": 10, "output_path": {:?}}}"#,
        path.to_str().unwrap()
    );
    let cfg = ExperimentConfig::from_json(&json).unwrap();
    assert_eq!(cfg.trials, Some(10));
    let r = run_experiment(&cfg).unwrap();
    let back: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.trials.len(), 10);
    assert_eq!(back.summary, r.summary);
    let csv = std::fs::read_to_string(path.with_extension("csv")).unwrap();
    assert!(csv.starts_with("metric,value"));
    assert!(csv.contains("max_damage"));
}
