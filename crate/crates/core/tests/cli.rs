mod common;

use std::path::Path;
use std::process::{Command, Output};

fn fedmail(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fedmail"));
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("FEDMAIL_THREADS", t),
        None => cmd.env_remove("FEDMAIL_THREADS"),
    };
    cmd.output().unwrap()
}

fn small_config(dir: &Path, preset: &str, extra: &str) -> String {
    let path = dir.join(format!("{preset}.json"));
    std::fs::write(
        &path,
        format!(
            r#"{{"preset": "{preset}", "vocab_dim": 512, "learning_rate": 0.1, {extra}
  "dataset": {{"synthetic": {{"sources": [{{"source": "Synthetic", "phishing": 150, "legitimate": 150}}]}}}}}}"#
        ),
    )
    .unwrap();
    path.display().to_string()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn preset_run_writes_outputs_and_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "exp2",
        r#""global_epochs": 5, "schedule": [{"start": 0, "end": 2, "clients": [1]}, {"start": 2, "end": 5, "clients": [1, 2, 3, 4, 5]}], "snapshots": true,"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = fedmail(
        &["run", "--config", &cfg, "--out", a.to_str().unwrap()],
        Some("1"),
    );
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = fedmail(
        &["run", "--config", &cfg, "--out", b.to_str().unwrap()],
        Some("4"),
    );
    assert_eq!(second.status.code(), Some(0));

    let files = tree(&a);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "config.json",
        "global_accuracy.svg",
        "ledger.csv",
        "local_accuracy.svg",
        "metrics.csv",
        "partition.json",
        "summary.json",
        "snapshots/epoch_004.fmpr",
    ] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    assert_eq!(files, tree(&b));
}

#[test]
fn overhead_preset_checks_constant_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "rq3-overhead", r#""global_epochs": 2,"#);
    let out = dir.path().join("o");
    let res = fedmail(
        &["run", "--config", &cfg, "--out", out.to_str().unwrap()],
        None,
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.matches("constant").count(), 3, "{stdout}");
    for k in ["k2", "k5", "k10"] {
        assert!(out.join(k).join("ledger.csv").is_file());
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "rq1-k5", r#""num_clients": 0,"#);
    let res = fedmail(
        &["run", "--config", &cfg, "--out", "/nonexistent/never"],
        None,
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/num_clients"));

    let res = fedmail(
        &["run", "--preset", "rq9", "--out", "/nonexistent/never"],
        None,
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("rq1-cl"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"preset": "exp1", "epochs": 3}"#).unwrap();
    let res = fedmail(
        &[
            "run",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            "/nonexistent/never",
        ],
        None,
    );
    assert_eq!(res.status.code(), Some(2));

    let res = fedmail(
        &["run", "--preset", "exp1", "--out", "/nonexistent/never"],
        Some("zero"),
    );
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"preset": "rq1-k2", "dataset": {"manifest": "missing.csv"}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let res = fedmail(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.csv"));
}

#[test]
fn ingest_and_presets_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus.jsonl");
    let report = dir.path().join("report.json");
    let manifest = common::fixture_dir().join("corpus/manifest.csv");
    let res = fedmail(
        &[
            "ingest",
            "--manifest",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 54);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["total"], 54);

    let res = fedmail(&["presets"], None);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    for name in [
        "rq1-cl",
        "rq3-overhead",
        "exp1",
        "exp2",
        "exp3",
        "rq6-persource",
    ] {
        assert!(text.contains(name), "{text}");
    }
}
