use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radar_annotate::dataset::{read_index, DatasetInfo};
use radar_annotate::synthetic::ScenarioConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_radar-annotate"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A 2.5 s drive down the corridor: 10 radar scans, 8 items.
fn short_recording(dir: &Path) -> PathBuf {
    let mut cfg = ScenarioConfig::preset("corridor", 3).unwrap();
    cfg.trajectory.waypoints = vec![[0.0, 0.0], [20.0, 0.0]];
    let scenario = dir.join("short.toml");
    std::fs::write(&scenario, cfg.to_toml()).unwrap();
    let rec = dir.join("rec");
    ok(&["simulate", "--scenario", p(&scenario), "--out", p(&rec)]);
    rec.join("manifest.txt")
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn generate_split_stats_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = short_recording(tmp.path());
    let ds = tmp.path().join("ds");
    let out = ok(&["generate", "--manifest", p(&manifest), "--out", p(&ds), "--stream", "--window-secs", "1"]);
    let index = std::fs::read_to_string(ds.join("index.jsonl")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), index);
    let records = read_index(&ds.join("index.jsonl")).unwrap();
    assert_eq!(records.len(), 8);
    for r in &records {
        for f in [&r.stack, &r.label, &r.label_polar, r.truth.as_ref().unwrap()] {
            assert!(ds.join(f).is_file(), "{f}");
        }
    }

    let t = records[4].time;
    let regions = tmp.path().join("regions.toml");
    std::fs::write(
        &regions,
        format!("[[region]]\nsplit = \"train\"\ntime_range = [0, {t}]\n[[region]]\nsplit = \"test\"\ntime_range = [{}, {}]\n", t + 1, i64::MAX),
    )
    .unwrap();
    let out = ok(&["split", "--dataset", p(&ds), "--regions", p(&regions), "--padding-m", "0"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["counts"]["train"], 5);
    assert_eq!(summary["counts"]["test"], 3);
    let train = std::fs::read_to_string(ds.join("splits/train.txt")).unwrap();
    assert_eq!(train.lines().count(), 5);

    let weights = tmp.path().join("w.csv");
    let out = ok(&["stats", "--dataset", p(&ds), "--split", "train", "--weights", p(&weights), "--empty-weight", "0.25"]);
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0]["weight"], 0.25);
    assert!(std::fs::read_to_string(&weights).unwrap().starts_with("target_id,weight\n0,0.25\n"));

    let report = tmp.path().join("report.json");
    ok(&["evaluate", "--dataset", p(&ds), "--predictions", p(&ds.join("labels")), "--out", p(&report)]);
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(rep["items"], 8);
    assert_eq!(rep["full"]["overall_accuracy"], 1.0);
    assert_eq!(rep["horizon_m"], 40.0);
}

#[test]
fn evaluate_polar_against_truth_and_missing_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = short_recording(tmp.path());
    let ds = tmp.path().join("ds");
    ok(&["generate", "--manifest", p(&manifest), "--out", p(&ds), "--window-secs", "0"]);
    let out = ok(&[
        "evaluate",
        "--dataset",
        p(&ds),
        "--layout",
        "polar",
        "--predictions",
        p(&ds.join("labels_polar")),
        "--targets",
        p(&ds.join("truth")),
        "--horizon-m",
        "20",
    ]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["horizon_m"], 20.0);
    let full: u64 = rep["full"]["support"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    let near: u64 = rep["horizon"]["support"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert!(near > 0 && near < full);

    let preds = tmp.path().join("preds");
    std::fs::create_dir(&preds).unwrap();
    let out = run(&["evaluate", "--dataset", p(&ds), "--predictions", p(&preds)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = short_recording(tmp.path());
    let mut runs = Vec::new();
    for workers in ["1", "3"] {
        let ds = tmp.path().join(format!("ds{workers}"));
        let aug = tmp.path().join(format!("aug{workers}"));
        ok(&["--workers", workers, "generate", "--manifest", p(&manifest), "--out", p(&ds), "--seed", "5", "--window-secs", "1"]);
        ok(&["--workers", workers, "augment", "--dataset", p(&ds), "--out", p(&aug), "--seed", "9"]);
        runs.push((files(&ds), files(&aug)));
    }
    assert!(!runs[0].0.is_empty());
    assert!(runs[0] == runs[1]);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = short_recording(tmp.path());
    let config = tmp.path().join("settings.toml");
    std::fs::write(&config, "[generate]\nwindow_secs = 0.5\ncartesian_size = 64\n").unwrap();
    let a = tmp.path().join("a");
    ok(&["--config", p(&config), "generate", "--manifest", p(&manifest), "--out", p(&a)]);
    let info = DatasetInfo::load(&a).unwrap();
    assert_eq!((info.config.window_secs, info.cartesian.size), (0.5, 64));
    let b = tmp.path().join("b");
    ok(&["--config", p(&config), "generate", "--manifest", p(&manifest), "--out", p(&b), "--window-secs", "0"]);
    let info = DatasetInfo::load(&b).unwrap();
    assert_eq!((info.config.window_secs, info.cartesian.size), (0.0, 64));

    std::fs::write(&config, "[generate]\nwindow = 1\n").unwrap();
    let out = run(&["--config", p(&config), "generate", "--manifest", p(&manifest), "--out", p(&b)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mostly_failed_run_exits_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = short_recording(tmp.path());
    let mut scans: Vec<PathBuf> = std::fs::read_dir(manifest.parent().unwrap().join("radar"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    scans.sort();
    // Every item whose stack includes scan 5 fails.
    std::fs::write(&scans[5], b"truncated").unwrap();
    let ds = tmp.path().join("ds");
    let out = run(&["generate", "--manifest", p(&manifest), "--out", p(&ds), "--window-secs", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_index(&ds.join("index.jsonl")).unwrap().len(), 5);
    assert_eq!(std::fs::read_to_string(ds.join("failures.txt")).unwrap().lines().count(), 3);
}

#[test]
fn fatal_errors_and_help() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--manifest", p(&tmp.path().join("none.txt")), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    let help = ok(&["generate", "--help"]);
    let text = String::from_utf8(help.stdout).unwrap();
    assert!(text.contains("[default: 8]") && text.contains("[default: 256]"), "{text}");
    let help = String::from_utf8(ok(&["split", "--help"]).stdout).unwrap();
    assert!(help.contains("[default: 10]"));
}
