use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn driftloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftloc")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn assert_schema(name: &str, value: &Value) {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn classify_still_water_on_small_grid() {
    let out = driftloc(&["classify", "--synthetic", "still", "--rows", "4", "--cols", "4"]);
    let v = stdout_json(&out);
    assert_schema("decomposition.schema.json", &v);
    // interior cells are fixed points, edge cells wander into them
    assert_eq!(v["persistent_group_count"], 4);
    assert_eq!(v["transient_cell_count"], 12);
    assert_eq!(v["transient_groups"][0]["label"], "B(1,2,3,4)");
}

#[test]
fn classify_uniform_flow_has_one_attractor() {
    let v = stdout_json(&driftloc(&["classify", "--synthetic", "uniform", "--rows", "6", "--cols", "7"]));
    assert_schema("decomposition.schema.json", &v);
    assert_eq!(v["persistent_group_count"], 1);
}

#[test]
fn classify_fixture_writes_decomposition() {
    let tmp = tempfile::tempdir().unwrap();
    let field = root().join("fixtures/double_gyre_21x29.field");
    let out = driftloc(&["classify", "--field", field.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    let v = stdout_json(&out);
    let written: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(v, written);
    let labels: Vec<&str> =
        v["transient_groups"].as_array().unwrap().iter().map(|g| g["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["B(1)", "B(2)", "B(1,2)"]);
}

#[test]
fn simulated_history_decodes_exactly_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let field = root().join("fixtures/double_gyre_21x29.field");
    let field = field.to_str().unwrap();
    let obs = tmp.path().join("obs.txt");
    let sim = stdout_json(&driftloc(&[
        "simulate",
        "--field",
        field,
        "--r",
        "1",
        "--start",
        "149",
        "--steps",
        "40",
        "--seed",
        "3",
        "--obs",
        obs.to_str().unwrap(),
    ]));
    let loc = stdout_json(&driftloc(&[
        "localize",
        "--field",
        field,
        "--r",
        "1",
        "--start",
        "149",
        "--obs",
        obs.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]));
    assert_schema("trajectory.schema.json", &loc);
    assert_eq!(loc["path"], sim["path"]);
    assert_eq!(loc["observations"], sim["observations"]);
    assert!(tmp.path().join("trajectory.json").exists());
}

#[test]
fn long_noisy_history_is_feasible_on_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let field = root().join("fixtures/double_gyre_21x29.field");
    let field = field.to_str().unwrap();
    let obs = tmp.path().join("obs.txt");
    let sim = driftloc(&[
        "simulate",
        "--field",
        field,
        "--start",
        "149",
        "--steps",
        "40",
        "--seed",
        "9",
        "--obs",
        obs.to_str().unwrap(),
    ]);
    assert!(sim.status.success());
    let loc = stdout_json(&driftloc(&[
        "localize",
        "--field",
        field,
        "--pi",
        "prob",
        "--start",
        "149",
        "--obs",
        obs.to_str().unwrap(),
    ]));
    assert_schema("trajectory.schema.json", &loc);
    assert_eq!(loc["path"].as_array().unwrap().len(), 41);
    assert_eq!(loc["mode"], "probabilistic");
}

#[test]
fn impossible_history_names_the_step() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = tmp.path().join("obs.txt");
    std::fs::write(&obs, "I I E\n").unwrap();
    let out = driftloc(&[
        "localize",
        "--synthetic",
        "still",
        "--rows",
        "5",
        "--cols",
        "5",
        "--r",
        "1",
        "--start",
        "12",
        "--obs",
        obs.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step 3"), "{err}");
}

#[test]
fn bad_symbols_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = tmp.path().join("obs.txt");
    std::fs::write(&obs, "N Q\n").unwrap();
    let out = driftloc(&["localize", "--synthetic", "still", "--start", "40", "--obs", obs.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn experiment_config_problems_are_all_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"name":"bad","field":{"synthetic":{"spec":{"kind":"uniform","u":1,"v":0},"rows":6,"cols":6}},
            "r":1.5,"modes":[],"horizons":[0],"runs":0,"seed":1,"start":"random"}"#,
    )
    .unwrap();
    let out = driftloc(&["experiment", "--config", cfg.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["r must lie", "modes", "horizon", "runs"] {
        assert!(err.contains(needle), "missing {needle:?} in {err}");
    }
}

#[test]
fn experiment_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.json");
    std::fs::write(
        &cfg,
        r#"{"name":"t","field":{"synthetic":{"spec":{"kind":"uniform","u":1,"v":0},"rows":6,"cols":6}},
            "modes":["det"],"horizons":[5],"runs":2,"seed":1,"start":"random","horizon":5}"#,
    )
    .unwrap();
    let out = driftloc(&["experiment", "--config", cfg.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn synthetic_experiment_runs_and_seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("syn.json");
    std::fs::write(
        &cfg,
        r#"{"name":"syn","field":{"synthetic":{"spec":{"kind":"single_gyre","amplitude":1,"inflow":1,"core":2},"rows":9,"cols":9}},
            "modes":["deterministic","probabilistic"],"horizons":[5,10],"runs":4,"seed":1,"start":"random"}"#,
    )
    .unwrap();
    let dir = |s: &str| tmp.path().join(s);
    let run = |out: &Path, seed: &str| {
        let o = driftloc(&[
            "experiment",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("syn.json")).unwrap()
    };
    let a = run(&dir("a"), "1");
    let b = run(&dir("b"), "2");
    assert_ne!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_schema("experiment.schema.json", &v);
    assert_eq!(v["conditions"].as_array().unwrap().len(), 4);
    assert_eq!(std::fs::read_to_string(dir("a").join("syn.csv")).unwrap().lines().count(), 5);
}

#[test]
fn synth_round_trips_through_classify() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("saddle.field");
    let out =
        driftloc(&["synth", "--synthetic", "saddle", "--rows", "9", "--cols", "11", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let from_file = stdout_json(&driftloc(&["classify", "--field", path.to_str().unwrap()]));
    let direct = stdout_json(&driftloc(&["classify", "--synthetic", "saddle", "--rows", "9", "--cols", "11"]));
    assert_eq!(from_file, direct);
}

#[test]
fn missing_field_file_fails_cleanly() {
    let out = driftloc(&["classify", "--field", "/nonexistent/x.field"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
