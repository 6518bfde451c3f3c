use std::path::Path;
use std::process::{Command, Output};

use phonoface::dsp::{write_wav_16bit, AudioClip};
use phonoface::stats::{read_marginals_csv, read_results_csv};

fn phonoface(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonoface"))
        .args(args)
        .output()
        .expect("spawn phonoface")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SPEC: &str = r#"{
  "n_subjects": 20,
  "clips_per_phoneme_per_subject": 2,
  "phoneme_labels": ["a", "b"],
  "am_names": ["w", "h"],
  "planted": [{"phoneme": "a", "am": "w", "beta": 1.0}],
  "noise_std": 0.3,
  "seed": 1,
  "n_mels": 8,
  "n_frames": 8
}"#;

const CONFIG: &str = r#"{
  "dataset": "data",
  "min_count": 10,
  "split": {"n_repeats": 3},
  "estimator": {"architecture": "linear", "max_epochs": 3}
}"#;

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = phonoface(&["run", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    assert_eq!(phonoface(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(phonoface(&[]).status.code(), Some(1));
}

#[test]
fn version_and_help() {
    let out = phonoface(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), phonoface::experiment::VERSION_TAG);
    let help = phonoface(&["run", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--config", "--out", "--workers"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn synth_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("spec.json"), SPEC).unwrap();
    std::fs::write(root.join("cfg.json"), CONFIG).unwrap();
    let out = phonoface(&["synth", "--spec", s(&root.join("spec.json")), "--out", s(&root.join("data"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("data/ground_truth.json").is_file());

    let out = phonoface(&["run", "--config", s(&root.join("cfg.json")), "--out", s(&root.join("res")), "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(read_results_csv(root.join("res/results.csv")).unwrap().len(), 4);
    assert_eq!(read_marginals_csv(root.join("res/marginals.csv")).unwrap().len(), 4);
    assert!(root.join("res/manifest.json").is_file());

    let out = phonoface(&["report", "--results", s(&root.join("res")), "--top", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Phonemes by mean score"));
    assert!(text.contains("Top 2 pairs"));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), CONFIG).unwrap();
    let out = phonoface(&["run", "--config", s(&dir.path().join("cfg.json")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = phonoface(&["report", "--results", s(&dir.path().join("nothing"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fully_failed_run_and_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("spec.json"), SPEC.replace("\"n_subjects\": 20", "\"n_subjects\": 4")).unwrap();
    std::fs::write(root.join("cfg.json"), CONFIG.replace("\"min_count\": 10", "\"min_count\": 1")).unwrap();
    phonoface(&["synth", "--spec", s(&root.join("spec.json")), "--out", s(&root.join("data"))]);
    let out = phonoface(&["run", "--config", s(&root.join("cfg.json")), "--out", s(&root.join("res"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
    let high = CONFIG.replace("\"min_count\": 10", "\"min_count\": 1000");
    std::fs::write(root.join("cfg.json"), high).unwrap();
    let out = phonoface(&["run", "--config", s(&root.join("cfg.json")), "--out", s(&root.join("res"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_run_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("spec.json"), SPEC).unwrap();
    let cfg = CONFIG.replace("\"max_epochs\": 3", "\"max_epochs\": 3, \"learning_rate\": 1e300");
    std::fs::write(root.join("cfg.json"), cfg).unwrap();
    phonoface(&["synth", "--spec", s(&root.join("spec.json")), "--out", s(&root.join("data"))]);
    let out = phonoface(&["run", "--config", s(&root.join("cfg.json")), "--out", s(&root.join("res"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn extract_mel_and_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::create_dir_all(root.join("audio")).unwrap();
    let tone: Vec<f64> = (0..16_000).map(|n| 0.3 * (n as f64 * 0.2).sin()).collect();
    write_wav_16bit(root.join("audio/u1.wav"), &AudioClip::new(tone, 16_000).unwrap()).unwrap();
    std::fs::write(
        root.join("align.tsv"),
        "# utterance\tsubject\tlabel\tstart\tend\nu1\ts1\tiː\t0.0\t0.3\nu1\ts1\tb\t0.3\t0.31\nu1\ts1\tiː\t0.31\t0.9\n",
    )
    .unwrap();
    let out = phonoface(&[
        "extract-mel",
        "--audio-dir",
        s(&root.join("audio")),
        "--align",
        s(&root.join("align.tsv")),
        "--out-cache",
        s(&root.join("mels")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let clips = phonoface::experiment::read_mel_cache(root.join("mels")).unwrap();
    assert_eq!(clips.len(), 2);
    assert!(clips.iter().all(|c| c.spec.shape() == (64, 32) && c.phoneme == "iː"));

    let out = phonoface(&["inventory", "--align", s(&root.join("align.tsv")), "--min-count", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("iː") && l.ends_with("yes")));
    assert!(text.lines().any(|l| l.starts_with('b') && l.ends_with("no")));

    std::fs::write(root.join("bad.tsv"), "u1\ts1\tiː\tzero\t0.3\n").unwrap();
    assert_eq!(phonoface(&["inventory", "--align", s(&root.join("bad.tsv"))]).status.code(), Some(2));
}

#[test]
fn compute_am_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::create_dir_all(root.join("lm")).unwrap();
    for (k, subject) in ["s1", "s2"].iter().enumerate() {
        let mut text = String::from("index,x,y,z\n");
        for i in 0..68 {
            let f = i as f64 + k as f64;
            text.push_str(&format!("{i},{},{},{}\n", f.sin() * 50.0, f.cos() * 40.0, (0.3 * f).sin() * 10.0));
        }
        std::fs::write(root.join(format!("lm/{subject}.csv")), text).unwrap();
    }
    let defs = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/table1_ams.json");
    let out = phonoface(&["compute-am", "--landmarks-dir", s(&root.join("lm")), "--ams", defs, "--out", s(&root.join("ams.csv"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = phonoface::anthropometry::read_am_csv(root.join("ams.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].values.len(), 20);

    std::fs::write(root.join("lm/s3.csv"), "index,x,y,z\n0,1,2,3\n").unwrap();
    let out = phonoface(&["compute-am", "--landmarks-dir", s(&root.join("lm")), "--ams", defs, "--out", s(&root.join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}
