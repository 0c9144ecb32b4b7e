use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selfish-sim"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const SIM: &str = r#"{"protocol": "nakamoto", "rounds": 5000, "repeats": 2, "seed": 11,
  "miners": [{"power": 0.55, "kind": "honest"}, {"power": 0.3, "kind": "selfish"},
             {"power": 0.15, "kind": "honest"}]}"#;

const SWEEP: &str = r#"{"protocol": "strongchain", "rounds": 5000, "repeats": 2,
  "sweep": {"attackers": 2, "alpha_grid": [0.1, 0.3, 0.45]}}"#;

#[test]
fn simulate_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sim.json"), SIM).unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate", "--config", "sim.json", "--out", "o", "--jobs", "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.path().join("o/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "protocol,gamma,n_attackers,alpha_per_attacker,run_index,rounds,seed,miner_id,miner_kind,revenue,fair_share"
    );
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(!csv.contains('\r'));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 16);
    assert!(manifest["timestamp"].as_str().unwrap().ends_with('Z'));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sim.json"), SIM).unwrap();
    let a = run(
        dir.path(),
        &["simulate", "--config", "sim.json", "--out", "a"],
    );
    let b = run(
        dir.path(),
        &[
            "simulate", "--config", "sim.json", "--out", "b", "--seed", "12",
        ],
    );
    assert!(a.status.success() && b.status.success());
    let a = fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep.json"), SWEEP).unwrap();
    let a = run(
        dir.path(),
        &[
            "sweep",
            "--config",
            "sweep.json",
            "--out",
            "a",
            "--jobs",
            "1",
        ],
    );
    let b = run(
        dir.path(),
        &[
            "sweep",
            "--config",
            "sweep.json",
            "--out",
            "b",
            "--jobs",
            "2",
        ],
    );
    assert!(a.status.success() && b.status.success());
    for file in [
        "results.csv",
        "thresholds.json",
        "plotdata/strongchain_g0_k2.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn sweep_outputs_have_threshold_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep.json"), SWEEP).unwrap();
    let out = run(
        dir.path(),
        &["sweep", "--config", "sweep.json", "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let thresholds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/thresholds.json")).unwrap())
            .unwrap();
    let record = &thresholds["strongchain/gamma=0/k=2"];
    assert_eq!(record["n_attackers"], 2);
    let plot = fs::read_to_string(dir.path().join("o/plotdata/strongchain_g0_k2.csv")).unwrap();
    assert!(plot.starts_with("alpha,revenue,fair_share,"));
    for line in plot.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], cols[2]);
    }
}

#[test]
fn bad_config_fails_with_json_error_and_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"protocol": "nakamoto", "miners": [{"power": 0.5, "kind": "selfish"}]}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["simulate", "--config", "bad.json", "--out", "o"],
    );
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("miners"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_file_and_bad_usage_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sweep", "--config", "nope.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let out = run(dir.path(), &["sweep"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn unwritable_output_is_rolled_back() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sim.json"), SIM).unwrap();
    // A plain file where the output directory should go.
    fs::write(dir.path().join("o"), "occupied").unwrap();
    let out = run(
        dir.path(),
        &["simulate", "--config", "sim.json", "--out", "o"],
    );
    assert!(!out.status.success());
    assert_eq!(
        fs::read_to_string(dir.path().join("o")).unwrap(),
        "occupied"
    );
}

#[test]
fn reproduce_table1_small_budget() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("suite.json"),
        r#"{"rounds": 2000, "repeats": 2}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "reproduce-table1",
            "--config",
            "suite.json",
            "--out",
            "o",
            "--seed",
            "5",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let thresholds: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/thresholds.json")).unwrap())
            .unwrap();
    assert_eq!(thresholds.len(), 22);
    for key in [
        "nakamoto/gamma=0/k=1",
        "strongchain/gamma=0/k=7",
        "fruitchain/gamma=1/k=1",
        "fruitchain/gamma=0.5/k=2/rivals=0.4",
    ] {
        assert!(thresholds.contains_key(key), "missing {key}");
    }
    let plots = fs::read_dir(dir.path().join("o/plotdata")).unwrap().count();
    assert_eq!(plots, 22);
}
