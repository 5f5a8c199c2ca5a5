//! End-to-end runs of the `bridgesim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bridgesim::tables::read_metrics;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "rounds": 10,
  "population": { "n_raters": 40 }
}"#;

fn bridgesim(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bridgesim"));
    cmd.args(args).env_remove("BRIDGESIM_SEED");
    if let Some(s) = env_seed {
        cmd.env("BRIDGESIM_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_the_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("out");
    let o = bridgesim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["metrics.csv", "model.json", "policy_trajectory.csv", "config.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let records = read_metrics(fs::File::open(out.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 10);
    // One snapshot per refit (default cadence 5).
    let snaps = fs::read_dir(out.join("models"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("model_round_"))
        .count();
    assert_eq!(snaps, 2);
}

#[test]
fn env_seed_overrides_the_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let run = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out = tmp.path().join(name);
        let mut args = vec!["run", "--config", &cfg, "--out", out.to_str().unwrap()];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        let o = bridgesim(&args, env);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("metrics.csv")).unwrap()
    };
    let both = run("both", Some("5"), Some("7"));
    let env_only = run("env", None, Some("7"));
    let flag7 = run("flag7", Some("7"), None);
    let flag5 = run("flag5", Some("5"), None);
    assert_eq!(both, env_only);
    assert_eq!(both, flag7);
    assert_ne!(both, flag5);
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        (r#"{"rounds": 5, "populaton": {}}"#, "populaton"),
        (r#"{"rounds": -3}"#, "rounds"),
        (r#"{"rounds": 0}"#, "rounds"),
        (r#"{"fit": {"epochs": 0}}"#, "fit.epochs"),
        (r#"{"population": {"n_raters": "many"}}"#, "population.n_raters"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), text);
        let o = bridgesim(&["run", "--config", &cfg, "--out", out], None);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let missing = tmp.path().join("nope.json");
    let o = bridgesim(&["run", "--config", missing.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write(tmp.path(), "ok.json", SMALL);
    let o = bridgesim(&["run", "--config", &cfg, "--out", out], Some("seven"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("BRIDGESIM_SEED"));
}

#[test]
fn unwritable_output_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let blocker = write(tmp.path(), "file", "not a directory");
    let o = bridgesim(&["run", "--config", &cfg, "--out", &blocker], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_runs_one_directory_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("sweep");
    let o = bridgesim(
        &[
            "sweep",
            "--config",
            &cfg,
            "--param",
            "policy_update.novelty_weight",
            "--values",
            "0,0.5",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dirs: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(dirs.len(), 2);
    for d in &dirs {
        let effective = fs::read_to_string(Path::new(d).join("config.json")).unwrap();
        assert!(effective.contains("novelty_weight"));
        assert!(Path::new(d).join("metrics.csv").is_file());
    }
    let bad = bridgesim(
        &["sweep", "--config", &cfg, "--param", "fit.nonexistent.x", "--values", "1", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(bad.status.code(), Some(2), "{}", stderr(&bad));
}

#[test]
fn ingest_replays_protocol_records() {
    let tmp = TempDir::new().unwrap();
    let good = r#"{"submission_id":"x1","post_id":0,"accuracy":0.9,"polish":0.5,"slant":[0.0],"style":[0,0,0,0],"claim":[1,0,0,0,0,0,0,0]}"#;
    let broken = r#"{"submission_id":"x2","post_id":0,"accuracy":0.9"#;
    let feed = write(tmp.path(), "feed.ndjson", &format!("{good}\n{broken}\n{good}\n"));
    let cfg = write(tmp.path(), "c.json", SMALL);
    let total = |dir: &Path| -> u64 {
        read_metrics(fs::File::open(dir.join("metrics.csv")).unwrap())
            .unwrap()
            .iter()
            .map(|r| r.external_ingested)
            .sum()
    };

    let out = tmp.path().join("flag");
    let o = bridgesim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--ingest", &feed], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(total(&out), 1);

    // A config-level ingest path resolves relative to the config file.
    let cfg2 = write(
        tmp.path(),
        "c2.json",
        r#"{"rounds": 10, "population": {"n_raters": 40}, "ingest_file": "feed.ndjson"}"#,
    );
    let out2 = tmp.path().join("cfg");
    let o = bridgesim(&["run", "--config", &cfg2, "--out", out2.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(total(&out2), 1);
}
