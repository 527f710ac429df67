use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(name)
}

fn qkdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdlab")).args(args).env_remove("QKDLAB_LOG_LEVEL").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The last stderr line parsed as the machine-readable error report.
fn error_report(o: &Output) -> Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.lines().last().expect("stderr is empty")).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs a bundled scenario and returns the process output and artifact.
fn run_scenario(command: &str, name: &str, dir: &Path) -> (Output, PathBuf) {
    let out = dir.join(name);
    let cfg = scenario(name);
    let o = qkdlab(&[command, "--config", path_str(&cfg), "--out", path_str(&out)]);
    (o, out)
}

#[test]
fn every_bundled_scenario_runs_with_its_documented_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("reverse-space", "reverse-space-6mode.json", 0),
        ("synth", "synth-6mode.json", 0),
        ("synth", "synth-defended.json", 0),
        ("synth", "synth-4mode.json", 0),
        ("synth", "synth-bright.json", 0),
        ("synth", "synth-infeasible.json", 3),
        ("verify", "verify-faked-states.json", 0),
        ("verify", "verify-cnot.json", 4),
        ("simulate", "simulate-faked-states.json", 0),
        ("simulate", "simulate-d2-half.json", 0),
        ("simulate", "simulate-cnot-mixture.json", 0),
        ("simulate", "simulate-bright.json", 0),
        ("fuzz", "fuzz-apd.json", 0),
        ("classify", "classify-registry.json", 0),
        ("report", "report.json", 0),
    ];
    let mut seen = std::collections::BTreeSet::new();
    for (command, name, code) in cases {
        let (o, _) = run_scenario(command, name, dir.path());
        assert_eq!(o.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        seen.insert(command);
    }
    assert_eq!(seen.len(), 7, "every subcommand has a scenario");
    let bundled = std::fs::read_dir(root().join("scenarios"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "json"))
        .count();
    // cnot.json is an attack document, not a scenario.
    assert_eq!(bundled, cases.len() + 1);
}

#[test]
fn reverse_space_of_the_six_mode_receiver_has_dimension_five() {
    let o = qkdlab(&["reverse-space", "--receiver", "interferometric-6mode"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("reverse-space  receiver=interferometric-6mode  dim=5\n"));
}

#[test]
fn synth_artifacts_describe_the_families() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_scenario("synth", "synth-6mode.json", dir.path());
    assert!(o.status.success());
    let a = read(&path);
    assert_eq!(a["kind"], "synth");
    assert_eq!(a["family"]["trivial"], false);
    assert_eq!(a["family"]["null_basis"].as_array().unwrap().len(), 3);
    assert_eq!(a["samples"].as_array().unwrap().len(), 3);

    let (o, path) = run_scenario("synth", "synth-defended.json", dir.path());
    assert!(o.status.success());
    let a = read(&path);
    assert_eq!(a["family"]["trivial"], true);
    assert!(a["family"]["note"].as_str().unwrap().contains("trivial"));
    assert!(stdout(&o).contains("trivial=true"));
}

#[test]
fn infeasible_synthesis_exits_with_code_three() {
    let o = qkdlab(&["synth", "--config", path_str(&scenario("synth-infeasible.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let e = error_report(&o);
    assert_eq!(e["code"], "infeasible");
    assert_eq!(e["context"]["receiver"], "hv-only-strict");
}

#[test]
fn cnot_verification_fails_on_the_hadamard_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let attack = scenario("cnot.json");
    let o = qkdlab(&["verify", "--attack", path_str(&attack), "--receiver", "ideal-bb84", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let e = error_report(&o);
    assert_eq!(e["code"], "verification-failed");
    assert_eq!(e["context"]["oblivious"], false);
    let a = read(&out);
    let rows = a["report"]["per_row_residuals"].as_array().unwrap();
    let row = rows
        .iter()
        .find(|r| r["alice"] == "+" && r["setting"] == "hadamard" && r["outcome"] == "v1")
        .unwrap();
    assert!(row["residual"].as_f64().unwrap() > 0.7);
    assert!(stdout(&o).contains("residual alice=+ setting=hadamard outcome=v1"));
}

#[test]
fn builtin_attacks_resolve_by_name() {
    let o = qkdlab(&["verify", "--receiver", "interferometric-6mode", "--attack", "builtin:faked-states"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASS"));
    let o = qkdlab(&["verify", "--receiver", "ideal-bb84", "--attack", "builtin:nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "malformed-params");
}

#[test]
fn four_mode_report_row() {
    let o = qkdlab(&["report", path_str(&scenario("artifacts/simulate-d2-half.json"))]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("efficiency comp=0.125 had=0.250 qber=0"), "{}", stdout(&o));
}

#[test]
fn empty_report_is_empty() {
    let o = qkdlab(&["report"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn fuzz_report_lists_the_blinding_properties() {
    let o = qkdlab(&["report", path_str(&scenario("artifacts/fuzz-apd.json"))]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.trim_start().starts_with("properties:")).unwrap();
    for p in ["Blinding", "WeakUnderBlinding", "StrongUnderBlinding"] {
        assert!(line.contains(p), "{line}");
    }
}

#[test]
fn report_rendering_is_stable() {
    let a = qkdlab(&["report", "--config", path_str(&scenario("report.json"))]);
    let b = qkdlab(&["report", "--config", path_str(&scenario("report.json"))]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let order: Vec<usize> =
        ["simulate ", "fuzz ", "verify ", "classify "].iter().map(|k| text.find(k).unwrap()).collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn artifacts_are_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    for (command, name) in [
        ("simulate", "simulate-d2-half.json"),
        ("fuzz", "fuzz-apd.json"),
        ("verify", "verify-cnot.json"),
        ("classify", "classify-registry.json"),
    ] {
        let (_, path) = run_scenario(command, name, dir.path());
        let fresh = std::fs::read(&path).unwrap();
        let bundled = std::fs::read(scenario("artifacts").join(name)).unwrap();
        assert!(fresh == bundled, "{name} differs from the bundled artifact");
    }
    let seeded = |seed: &str, file: &str| {
        let out = dir.path().join(file);
        let o = qkdlab(&[
            "simulate", "--receiver", "interferometric-6mode", "--attack", "builtin:six-mode-mixed", "--rounds", "3000",
            "--seed", seed, "--out", path_str(&out),
        ]);
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(seeded("11", "a.json"), seeded("11", "b.json"));
    assert_ne!(seeded("11", "a.json"), seeded("12", "c.json"));
}

#[test]
fn seed_is_echoed_and_defaults_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = qkdlab(&["simulate", "--receiver", "ideal-bb84", "--rounds", "100", "--out", path_str(&out)]);
    assert!(o.status.success());
    let a = read(&out);
    assert_eq!(a["seed"], 0);
    assert_eq!(a["report"]["seed"], 0);
}

#[test]
fn cnot_mixture_disturbs_a_quarter_of_the_hadamard_bits() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_scenario("simulate", "simulate-cnot-mixture.json", dir.path());
    assert!(o.status.success());
    let a = read(&path);
    assert!((a["exact"]["per_basis"]["hadamard"]["qber"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    let h = &a["report"]["per_basis"]["hadamard"];
    let q = h["qber"].as_f64().unwrap();
    let n = h["sifted"].as_f64().unwrap();
    assert!((q - 0.25).abs() < 3.0 * (0.25 * 0.75 / n).sqrt(), "{q}");
}

#[test]
fn round_log_is_readable() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("rounds.ndjson");
    let out = dir.path().join("s.json");
    let o = qkdlab(&[
        "simulate", "--receiver", "interferometric-6mode", "--attack", "builtin:faked-states", "--rounds", "500", "--seed",
        "5", "--log", path_str(&log), "--out", path_str(&out),
    ]);
    assert!(o.status.success());
    let (header, records) = qkdlab::protocol::read_log(std::io::BufReader::new(std::fs::File::open(&log).unwrap())).unwrap();
    assert_eq!((header.seed, header.rounds), (5, 500));
    assert_eq!(records.len(), 500);
    // Logged and unlogged runs agree.
    let unlogged = dir.path().join("u.json");
    let o = qkdlab(&[
        "simulate", "--receiver", "interferometric-6mode", "--attack", "builtin:faked-states", "--rounds", "500", "--seed",
        "5", "--out", path_str(&unlogged),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out).unwrap(), std::fs::read(unlogged).unwrap());
}

#[test]
fn fuzz_replay_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let bundled = scenario("artifacts/fuzz-apd.json");
    let o = qkdlab(&["fuzz", "--replay", path_str(&bundled), "--anomaly", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains(" ok "));

    let mut tampered = read(&bundled);
    let counts = tampered["report"]["anomalies"][0]["counts"].as_object_mut().unwrap();
    let key = counts.keys().next().unwrap().clone();
    counts[&key] = Value::from(counts[&key].as_u64().unwrap() + 1);
    let path = dir.path().join("tampered.json");
    std::fs::write(&path, serde_json::to_string(&tampered).unwrap()).unwrap();
    let o = qkdlab(&["fuzz", "--replay", path_str(&path), "--anomaly", "0"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_report(&o)["context"]["anomalies"], serde_json::json!([0]));

    let trace = dir.path().join("trace.ndjson");
    let out = dir.path().join("f.json");
    let o = qkdlab(&["fuzz", "--max-cases", "600", "--seed", "2", "--trace", path_str(&trace), "--out", path_str(&out)]);
    assert!(o.status.success());
    let lines = std::fs::read_to_string(trace).unwrap().lines().count() as u64;
    assert_eq!(Some(lines), read(&out)["report"]["test_cases_run"].as_u64());
}

#[test]
fn classify_exports_a_graph() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let o = qkdlab(&["classify", "--dot", path_str(&dot)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(stdout(&o).contains("camera-in-lab"));

    // A record whose expected class disagrees is a verification failure.
    let mut records: Value = serde_json::to_value(qkdlab::classify::registry()).unwrap();
    records[0]["expected_class"] = Value::from("side-channel");
    let path = dir.path().join("records.json");
    std::fs::write(&path, records.to_string()).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"classify": {"records": "records.json"}}"#).unwrap();
    let o = qkdlab(&["classify", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_report(&o)["context"]["records"], serde_json::json!(["pns"]));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let unknown = write("unknown.json", r#"{"receiver": "ideal-bb84", "rounds": 10, "colour": "blue"}"#);
    let o = qkdlab(&["simulate", "--config", path_str(&unknown)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "json");

    let o = qkdlab(&["synth", "--receiver", "interferometric-7mode"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "unknown-kind");

    let o = qkdlab(&["synth"]);
    assert_eq!(error_report(&o)["code"], "missing-receiver");

    let o = qkdlab(&["simulate", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "usage");

    let version = write("v2.json", r#"{"v": 2, "receiver": "ideal-bb84"}"#);
    let o = qkdlab(&["synth", "--config", path_str(&version)]);
    assert_eq!(error_report(&o)["code"], "schema");

    let o = qkdlab(&["report", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "io");
}

#[test]
fn report_rejects_other_artifact_versions() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = read(&scenario("artifacts/verify-cnot.json"));
    a["v"] = Value::from(2);
    let path = dir.path().join("old.json");
    std::fs::write(&path, a.to_string()).unwrap();
    let o = qkdlab(&["report", path_str(&path)]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_report(&o);
    assert_eq!(e["code"], "schema");
    assert_eq!(e["context"]["version"], 2);
}

#[test]
fn log_level_controls_json_diagnostics() {
    let run = |level: &str| {
        Command::new(env!("CARGO_BIN_EXE_qkdlab"))
            .args(["reverse-space", "--receiver", "ideal-bb84"])
            .env("QKDLAB_LOG_LEVEL", level)
            .output()
            .unwrap()
    };
    let o = run("info");
    assert!(o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(!err.is_empty());
    for line in err.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["level"], "info");
    }
    assert!(run("error").stderr.is_empty());
    let o = run("loud");
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["code"], "malformed-params");
}
