use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabdisent"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 84 normals on a line plus 12 off-line anomalies, four attributes.
fn write_toy_csv(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut text = String::from("a,b,c,d,label\n");
    for i in 0..96 {
        let t: f64 = rng.gen_range(-1.0..1.0);
        let (c, d, label) = if i % 8 == 7 {
            (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 1)
        } else {
            (2.0 * t, 0.5 * t, 0)
        };
        text.push_str(&format!("{t},{},{c},{d},{label}\n", -t));
    }
    fs::write(path, text).unwrap();
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            "dataset = \"toy\"\ndataset_path = \"toy.csv\"\noutput_dir = \"out\"\ntrials = 2\n{extra}\n\
             [model]\nepochs = 3\nbatch_size = 16\nlatent_channels = 8\n"
        ),
    )
    .unwrap();
    path
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn run_writes_exactly_the_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_csv(&tmp.path().join("toy.csv"));
    let cfg = write_config(tmp.path(), "toy.toml", "");
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("AUC-PR"));

    let dir = tmp.path().join("out");
    let expected: BTreeSet<String> = [
        "config.toml",
        "metrics.json",
        "manifest.json",
        "scores_trial0.csv",
        "scores_trial1.csv",
        "loss_trace_trial0.csv",
        "loss_trace_trial1.csv",
        "attention_trial0_head0.csv",
        "attention_trial0_head1.csv",
        "attention_trial1_head0.csv",
        "attention_trial1_head1.csv",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    assert_eq!(listing(&dir), expected);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let listed: BTreeSet<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(listed, expected);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["dataset"], "toy");
    assert_eq!(metrics["config_hash"], manifest["config_hash"]);
    assert_eq!(metrics["per_trial"].as_array().unwrap().len(), 2);
    for key in ["auc_pr_mean", "auc_pr_std", "auc_roc_mean", "auc_roc_std"] {
        assert!(metrics[key].is_f64(), "{key}");
    }

    let scores = fs::read_to_string(dir.join("scores_trial0.csv")).unwrap();
    // Test set: the 12 anomalies plus the 42 normals left out of training.
    assert_eq!(scores.lines().count(), 1 + 54);
    let trace = fs::read_to_string(dir.join("loss_trace_trial1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 3);
    let attn = fs::read_to_string(dir.join("attention_trial0_head1.csv")).unwrap();
    assert_eq!(attn.lines().count(), 4);
    for line in attn.lines() {
        let sum: f64 = line.split(',').map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn identical_configs_give_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_csv(&tmp.path().join("toy.csv"));
    let cfg = write_config(tmp.path(), "toy.toml", "");
    let dir = tmp.path().join("out");
    assert!(run(&["run", cfg.to_str().unwrap()]).status.success());
    let first = fs::read(dir.join("metrics.json")).unwrap();
    // A rerun replaces the previous outputs.
    assert!(run(&["run", cfg.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(dir.join("metrics.json")).unwrap(), first);

    let other = tmp.path().join("other");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--output-dir",
        other.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(other.join("metrics.json")).unwrap(), first);
}

#[test]
fn single_trial_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_csv(&tmp.path().join("toy.csv"));
    let cfg = write_config(tmp.path(), "toy.toml", "");
    let o = run(&["run", cfg.to_str().unwrap(), "--trials", "1", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["auc_pr_std"], 0.0);
    assert_eq!(metrics["auc_roc_std"], 0.0);
    assert_eq!(metrics["per_trial"][0]["seed"], 7);
}

#[test]
fn failed_run_exits_nonzero_and_leaves_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "toy.toml", "");
    // toy.csv is missing.
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error:"));
    let marker = fs::read_to_string(tmp.path().join("out/INCOMPLETE")).unwrap();
    assert!(marker.contains("toy.csv"), "{marker}");
    assert!(!tmp.path().join("out/metrics.json").exists());

    // Training blows up on huge inputs; partial outputs stay flagged.
    fs::write(
        tmp.path().join("toy.csv"),
        "a,b,label\n1e200,2e200,0\n-1e200,3e200,0\n2e200,-1e200,0\n1e200,1e200,0\n1e200,5e200,1\n",
    )
    .unwrap();
    let cfg = write_config(tmp.path(), "raw.toml", "normalization = \"none\"");
    let o = run(&["run", cfg.to_str().unwrap(), "--trials", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
    let dir = tmp.path().join("out");
    assert!(dir.join("INCOMPLETE").exists());
    assert!(!dir.join("manifest.json").exists());
}

#[test]
fn validate_fills_defaults_and_lists_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("thyroid.toml");
    fs::write(&cfg, "dataset = \"thyroid\"\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: toml::Value = toml::from_str(&stdout(&o)).unwrap();
    let hyper = &resolved["hyper"];
    assert_eq!(hyper["epochs"].as_integer(), Some(100));
    assert_eq!(hyper["latent_channels"].as_integer(), Some(128));
    assert_eq!(hyper["batch_size"].as_integer(), Some(512));
    assert_eq!(hyper["learning_rate"].as_float(), Some(1e-4));
    assert_eq!(resolved["trial_seeds"].as_array().unwrap().len(), 3);

    fs::write(
        &cfg,
        "dataset = \"thyroid\"\ntrials = 0\n[model]\nnum_heads = 3\nablation = \"complement_mask\"\nlearning_rate = -1e-4\n",
    )
    .unwrap();
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    for field in ["trials", "model.ablation", "model.learning_rate"] {
        assert!(err.contains(field), "{field} missing from:\n{err}");
    }

    fs::write(&cfg, "dataset = \"thyroid\"\nepochs = 5\n").unwrap();
    assert!(!run(&["validate", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn score_and_export_from_a_saved_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("toy.csv");
    write_toy_csv(&csv);
    let cfg = write_config(tmp.path(), "toy.toml", "");
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--save-checkpoints",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = tmp.path().join("out/checkpoint_trial0.ckpt");
    assert!(ckpt.exists());

    let o = run(&["score", ckpt.to_str().unwrap(), csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,score"));
    let scores: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 96);
    assert!(scores.iter().all(|s| s.is_finite() && *s >= 0.0));
    assert!(stderr(&o).contains("AUC-ROC"));

    let attn_dir = tmp.path().join("attn");
    let o = run(&[
        "export-attn",
        ckpt.to_str().unwrap(),
        csv.to_str().unwrap(),
        attn_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        listing(&attn_dir),
        ["attention_head0.csv", "attention_head1.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    );

    let o = run(&["score", csv.to_str().unwrap(), csv.to_str().unwrap()]);
    assert!(!o.status.success());
}
