//! End-to-end subcommand tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hstf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hstf"))
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, count: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("corpus-{seed}"));
    let output = hstf()
        .args(["synth", "--count", &count.to_string(), "--seed", &seed.to_string()])
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    ok(&output);
    out
}

fn extract(dir: &Path, corpus: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let output = hstf()
        .arg("extract")
        .arg("--input")
        .arg(corpus.join("flows.jsonl"))
        .arg("--labels")
        .arg(corpus.join("labels.csv"))
        .arg("--output")
        .arg(&out)
        .arg("--bin")
        .output()
        .unwrap();
    ok(&output);
    out
}

/// Small training config so CLI tests stay fast.
fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.toml");
    std::fs::write(&path, "[train]\nmax_epochs = 2\npatience = 2\n").unwrap();
    path
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 40, 5);
    let b_dir = dir.path().join("again");
    let output = hstf()
        .args(["synth", "--count", "40", "--seed", "5"])
        .arg("--output")
        .arg(&b_dir)
        .output()
        .unwrap();
    ok(&output);
    assert_eq!(
        std::fs::read(a.join("flows.jsonl")).unwrap(),
        std::fs::read(b_dir.join("flows.jsonl")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("labels.csv")).unwrap(),
        std::fs::read(b_dir.join("labels.csv")).unwrap()
    );
}

#[test]
fn extract_then_train_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 60, 11);
    let extracted = extract(dir.path(), &corpus, "ex");
    assert!(extracted.join("flows.jsonl").exists());
    assert!(extracted.join("samples.jsonl").exists());
    assert!(extracted.join("samples.bin").exists());

    let ckpt = dir.path().join("m.ckpt.json");
    let cfg = quick_config(dir.path());
    let output = hstf()
        .arg("train")
        .arg("--input")
        .arg(extracted.join("samples.bin"))
        .arg("--output")
        .arg(&ckpt)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(stdout.contains("train: epochs="));
    let history = std::fs::read_to_string(dir.path().join("m.ckpt.history.csv")).unwrap();
    assert!(history.starts_with("epoch,loss,acc,val_recall\n"));
    assert!(history.lines().count() >= 2);

    let output = hstf()
        .arg("detect")
        .arg("--input")
        .arg(extracted.join("samples.jsonl"))
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(stdout.contains("verdict="));
    assert!(stdout.contains("detect: flows=60"));
}

#[test]
fn detect_with_lambda_one_is_always_benign() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 40, 13);
    let extracted = extract(dir.path(), &corpus, "ex");
    let ckpt = dir.path().join("m.json");
    let cfg = quick_config(dir.path());
    ok(&hstf()
        .arg("train")
        .arg("--input")
        .arg(extracted.join("samples.bin"))
        .arg("--output")
        .arg(&ckpt)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap());

    let output = hstf()
        .arg("detect")
        .arg("--input")
        .arg(extracted.join("samples.jsonl"))
        .arg("--checkpoint")
        .arg(&ckpt)
        .args(["--lambda", "1.0"])
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(!stdout.contains("verdict=Malicious"));
    assert!(stdout.contains("malicious=0"));
}

#[test]
fn oversized_direction_is_flagged_truncated() {
    let dir = tempfile::tempdir().unwrap();
    // 55 requests on one tuple within the idle timeout.
    let mut lines = String::new();
    for i in 0..55 {
        let raw = base64_encode(format!("GET /{i} HTTP/1.1\r\nHost: h\r\n\r\n").as_bytes());
        lines.push_str(&format!(
            "{{\"src_host\":\"10.0.0.1\",\"src_port\":4000,\"dst_host\":\"10.0.0.2\",\"dst_port\":80,\"direction\":\"request\",\"ts_us\":{},\"raw_b64\":\"{}\"}}\n",
            1_000_000 + i * 1_000,
            raw
        ));
    }
    let capture = dir.path().join("big.jsonl");
    std::fs::write(&capture, lines).unwrap();

    let corpus = synth(dir.path(), 40, 17);
    let extracted = extract(dir.path(), &corpus, "ex");
    let ckpt = dir.path().join("m.json");
    let cfg = quick_config(dir.path());
    ok(&hstf()
        .arg("train")
        .arg("--input")
        .arg(extracted.join("samples.bin"))
        .arg("--output")
        .arg(&ckpt)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap());

    let output = hstf()
        .arg("detect")
        .arg("--input")
        .arg(&capture)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(stdout.contains("truncated"), "flag missing in: {stdout}");
    assert!(stdout.contains("truncated=1"));

    // Discard policy rejects the flow instead.
    let output = hstf()
        .arg("detect")
        .arg("--input")
        .arg(&capture)
        .arg("--checkpoint")
        .arg(&ckpt)
        .args(["--policy", "discard"])
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(stdout.contains("flows=0"));
    assert!(stdout.contains("discarded=1"));
}

#[test]
fn eval_unknown_preset_lists_options() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 40, 19);
    let extracted = extract(dir.path(), &corpus, "ex");
    let output = hstf()
        .arg("eval")
        .arg("--input")
        .arg(extracted.join("samples.bin"))
        .args(["--preset", "missing-preset"])
        .arg("--output")
        .arg(dir.path().join("eval"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error[HSTF-E013]"));
    assert!(stderr.contains("robustness-1to100"));
}

#[test]
fn eval_cross_corpus_mode_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let home = extract(dir.path(), &synth(dir.path(), 80, 23), "home");
    let away = extract(dir.path(), &synth(dir.path(), 80, 29), "away");
    let out_dir = dir.path().join("eval");
    let output = hstf()
        .arg("eval")
        .arg("--input")
        .arg(home.join("samples.bin"))
        .arg("--test-pool")
        .arg(away.join("samples.bin"))
        .args(["--preset", "robustness-1to1", "--repeats", "1"])
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    ok(&output);
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["mode"], "cross-corpus");
    assert_eq!(v["schema"], "hstf-report/v1");
    assert!(out_dir.join("roc.csv").exists());
}

#[test]
fn non_capture_input_fails_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.bin");
    std::fs::write(&bogus, b"this is not a capture of any kind").unwrap();
    let output = hstf()
        .arg("extract")
        .arg("--input")
        .arg(&bogus)
        .arg("--output")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error["), "stderr: {stderr}");
}

#[test]
fn empty_capture_is_a_warning_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, b"").unwrap();
    let out_dir = dir.path().join("out");
    let output = hstf()
        .arg("extract")
        .arg("--input")
        .arg(&empty)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = ok(&output);
    assert!(stdout.contains("samples=0"));
    assert_eq!(std::fs::read(out_dir.join("samples.jsonl")).unwrap().len(), 0);
}

#[test]
fn unlabeled_corpus_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 20, 31);
    // Extract without labels: everything stays unlabeled.
    let out = dir.path().join("ex");
    ok(&hstf()
        .arg("extract")
        .arg("--input")
        .arg(corpus.join("flows.jsonl"))
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap());
    let output = hstf()
        .arg("train")
        .arg("--input")
        .arg(out.join("samples.jsonl"))
        .arg("--output")
        .arg(dir.path().join("m.json"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unlabeled"), "stderr: {stderr}");
}

// Minimal base64 for fixture building (standard alphabet, padded).
fn base64_encode(data: &[u8]) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    let mut out = String::new();
    for chunk in data.chunks(3) {
        let b = [chunk[0], *chunk.get(1).unwrap_or(&0), *chunk.get(2).unwrap_or(&0)];
        let n = (u32::from(b[0]) << 16) | (u32::from(b[1]) << 8) | u32::from(b[2]);
        out.push(ALPHABET[(n >> 18) as usize & 63] as char);
        out.push(ALPHABET[(n >> 12) as usize & 63] as char);
        out.push(if chunk.len() > 1 { ALPHABET[(n >> 6) as usize & 63] as char } else { '=' });
        out.push(if chunk.len() > 2 { ALPHABET[n as usize & 63] as char } else { '=' });
    }
    out
}
